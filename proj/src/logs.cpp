#include "roadfuse/logs.hpp"

#include <string>

namespace roadfuse {

using nlohmann::json;

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const std::string& schema,
                         json header_extra)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  json header = json::object();
  header["schema"] = schema;
  header["version"] = kLogVersion;
  for (auto it = header_extra.begin(); it != header_extra.end(); ++it) header[it.key()] = it.value();
  out_ << header.dump() << '\n';
}

void JsonlWriter::write(const json& record) { out_ << record.dump() << '\n'; }

void JsonlWriter::close() {
  out_.flush();
  out_.close();
}

json read_jsonl(const std::filesystem::path& path, const std::string& schema,
                const std::function<void(const json&, std::size_t)>& on_record,
                const std::function<void(const json&)>& on_header) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogError(name, 0, "cannot open log");
  std::string line;
  std::size_t n = 0;
  json header;
  while (std::getline(in, line)) {
    ++n;
    if (in.eof()) throw LogError(name, n, "truncated record (no trailing newline)");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw LogError(name, n, "malformed record");
    }
    if (n == 1) {
      if (!j.is_object() || j.value("schema", "") != schema) {
        throw LogError(name, n, "expected schema '" + schema + "'");
      }
      if (!j.contains("version") || !j["version"].is_number_integer() ||
          j["version"].get<int>() != kLogVersion) {
        throw LogError(name, n, "unsupported log version");
      }
      header = std::move(j);
      if (on_header) {
        try {
          on_header(header);
        } catch (const json::exception& e) {
          throw LogError(name, n, std::string("bad header: ") + e.what());
        }
      }
      continue;
    }
    try {
      on_record(j, n);
    } catch (const json::exception& e) {
      throw LogError(name, n, std::string("bad record: ") + e.what());
    }
  }
  if (n == 0) throw LogError(name, 1, "empty log (missing header)");
  return header;
}

json box3d_to_json(const Box3D& box) {
  const Vec3& c = box.center();
  const Dimensions& d = box.dims();
  return json{{"x", c.x()}, {"y", c.y()}, {"z", c.z()}, {"l", d.length},
              {"w", d.width}, {"h", d.height}, {"yaw", box.yaw()}};
}

Box3D box3d_from_json(const json& j) {
  return Box3D({j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()},
               {j.at("l").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()},
               j.at("yaw").get<double>());
}

json frame_to_json(const StampedFrame& frame) {
  json payload = json::array();
  switch (frame.kind()) {
    case SensorKind::kCamera:
      for (const auto& d : std::get<std::vector<Detection2D>>(frame.payload)) {
        payload.push_back({{"u0", d.box.u_min()},
                           {"v0", d.box.v_min()},
                           {"u1", d.box.u_max()},
                           {"v1", d.box.v_max()},
                           {"label", d.label},
                           {"conf", d.confidence}});
      }
      break;
    case SensorKind::kRadar:
      for (const auto& p : std::get<std::vector<RadarPoint>>(frame.payload)) {
        payload.push_back({{"range", p.range}, {"azimuth", p.azimuth}, {"vr", p.radial_velocity}});
      }
      break;
    case SensorKind::kLidar:
      for (const auto& d : std::get<std::vector<Detection3D>>(frame.payload)) {
        json b = box3d_to_json(d.box);
        b["label"] = d.label;
        b["conf"] = d.confidence;
        payload.push_back(std::move(b));
      }
      break;
  }
  return json{{"sensor_id", frame.sensor_id},
              {"t", frame.t},
              {"kind", to_string(frame.kind())},
              {"payload", std::move(payload)}};
}

StampedFrame frame_from_json(const json& j) {
  StampedFrame f;
  f.sensor_id = j.at("sensor_id").get<std::string>();
  f.t = j.at("t").get<double>();
  const SensorKind kind = sensor_kind_from_string(j.at("kind").get<std::string>());
  const json& p = j.at("payload");
  switch (kind) {
    case SensorKind::kCamera: {
      std::vector<Detection2D> v;
      for (const auto& d : p) {
        v.push_back({f.sensor_id,
                     Box2D(d.at("u0").get<double>(), d.at("v0").get<double>(),
                           d.at("u1").get<double>(), d.at("v1").get<double>()),
                     d.at("label").get<std::string>(), d.at("conf").get<double>(), -1});
      }
      f.payload = std::move(v);
      break;
    }
    case SensorKind::kRadar: {
      std::vector<RadarPoint> v;
      for (const auto& d : p) {
        v.push_back({d.at("range").get<double>(), d.at("azimuth").get<double>(),
                     d.at("vr").get<double>(), -1});
      }
      f.payload = std::move(v);
      break;
    }
    case SensorKind::kLidar: {
      std::vector<Detection3D> v;
      for (const auto& d : p) {
        v.push_back({box3d_from_json(d), d.at("label").get<std::string>(),
                     d.at("conf").get<double>(), -1});
      }
      f.payload = std::move(v);
      break;
    }
  }
  return f;
}

}  // namespace roadfuse
