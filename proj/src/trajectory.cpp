#include "pev/trajectory.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace pev {

namespace {

using nlohmann::json;

json vec_to_json(const double* data, int n) {
  json a = json::array();
  for (int i = 0; i < n; ++i) a.push_back(data[i]);
  return a;
}

template <typename V>
V vec_from_json(const json& j) {
  V v;
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

json agent_to_json(const TrajectoryAgentRecord& a) {
  json j;
  j["p"] = vec_to_json(a.p.data(), 3);
  j["v"] = vec_to_json(a.v.data(), 3);
  j["q"] = vec_to_json(a.q.data(), 4);
  j["a"] = vec_to_json(a.action.data(), 4);
  return j;
}

TrajectoryAgentRecord agent_from_json(const json& j) {
  TrajectoryAgentRecord a;
  a.p = vec_from_json<Vec3>(j.at("p"));
  a.v = vec_from_json<Vec3>(j.at("v"));
  a.q = vec_from_json<Vec4>(j.at("q"));
  a.action = vec_from_json<Vec4>(j.at("a"));
  return a;
}

}  // namespace

Vec4 quat_from_rotation(const Mat3& R) {
  const Eigen::Quaterniond q(R);
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0.0) out = -out;  // canonical sign
  return out;
}

Mat3 rotation_from_quat(const Vec4& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3])
      .normalized()
      .toRotationMatrix();
}

struct TrajectoryWriter::Impl {
  std::ofstream os;
};

TrajectoryWriter::TrajectoryWriter(const std::string& path, std::uint64_t seed,
                                   const std::string& arena_preset,
                                   double dt_control)
    : impl_(std::make_unique<Impl>()) {
  impl_->os.open(path);
  if (!impl_->os)
    throw std::runtime_error("cannot write trajectory: " + path);
  json header;
  header["type"] = "header";
  header["version"] = 1;
  header["seed"] = seed;
  header["arena_preset"] = arena_preset;
  header["dt_control"] = dt_control;
  impl_->os << header.dump() << "\n";
}

TrajectoryWriter::~TrajectoryWriter() = default;

void TrajectoryWriter::append(const TrajectoryRecord& r) {
  json j;
  j["t"] = r.t;
  j["pursuer"] = agent_to_json(r.pursuer);
  j["evader"] = agent_to_json(r.evader);
  json ev;
  ev["catch"] = r.catch_;
  ev["contact"] = r.contact;
  ev["fail_pursuer"] = r.fail_pursuer;
  ev["fail_evader"] = r.fail_evader;
  j["events"] = ev;
  impl_->os << j.dump() << "\n";
  impl_->os.flush();
}

TrajectoryFile read_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read trajectory: " + path);
  TrajectoryFile file;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      break;  // truncated final line: keep what parsed so far
    }
    if (!have_header) {
      if (j.value("type", "") != "header")
        throw std::runtime_error("trajectory: missing header line");
      file.version = j.at("version").get<int>();
      file.seed = j.at("seed").get<std::uint64_t>();
      file.arena_preset = j.value("arena_preset", "");
      file.dt_control = j.at("dt_control").get<double>();
      have_header = true;
      continue;
    }
    TrajectoryRecord r;
    r.t = j.at("t").get<double>();
    r.pursuer = agent_from_json(j.at("pursuer"));
    r.evader = agent_from_json(j.at("evader"));
    const json& ev = j.at("events");
    r.catch_ = ev.at("catch").get<bool>();
    r.contact = ev.at("contact").get<bool>();
    r.fail_pursuer = ev.at("fail_pursuer").get<bool>();
    r.fail_evader = ev.at("fail_evader").get<bool>();
    file.records.push_back(r);
  }
  if (!have_header)
    throw std::runtime_error("trajectory: missing header line");
  return file;
}

TrajectoryRecord make_trajectory_record(const WorldState& world, double t,
                                        const Vec4& action_p,
                                        const Vec4& action_e,
                                        const StepEvents& events) {
  TrajectoryRecord r;
  r.t = t;
  r.pursuer.p = world.pursuer.body.p;
  r.pursuer.v = world.pursuer.body.v;
  r.pursuer.q = quat_from_rotation(world.pursuer.body.R);
  r.pursuer.action = action_p;
  r.evader.p = world.evader.body.p;
  r.evader.v = world.evader.body.v;
  r.evader.q = quat_from_rotation(world.evader.body.R);
  r.evader.action = action_e;
  r.catch_ = events.catch_;
  r.contact = events.contact;
  r.fail_pursuer = events.fail_pursuer;
  r.fail_evader = events.fail_evader;
  return r;
}

}  // namespace pev
