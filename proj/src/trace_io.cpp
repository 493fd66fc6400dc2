#include "atpg/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace atpg::trace_io {
namespace {

nlohmann::json rowMajor(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Eigen::MatrixXd fromRowMajor(const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw std::invalid_argument("trace: array has the wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[r * cols + c].get<double>();
  return m;
}

}  // namespace

std::string formatDouble(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

nlohmann::json toJson(const EpisodeTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : s.targets)
      targets.push_back({{"mean", rowMajor(t.mean.transpose())},
                         {"info", rowMajor(t.info)},
                         {"truth", rowMajor(t.truth.transpose())},
                         {"weight", t.weight},
                         {"in_fov", t.in_fov}});
    steps.push_back({{"t", s.t}, {"pose", rowMajor(s.pose)}, {"u", rowMajor(s.u.transpose())}, {"targets", targets}});
  }
  return {{"steps", steps}, {"reward_normalized", trace.reward_normalized}, {"reward", trace.reward}, {"tau", trace.tau}};
}

EpisodeTrace fromJson(const nlohmann::json& doc) {
  EpisodeTrace trace;
  try {
    trace.tau = doc.at("tau").get<double>();
    trace.reward_normalized = doc.at("reward_normalized").get<double>();
    trace.reward = doc.value("reward", std::nan(""));
    for (const auto& s : doc.at("steps")) {
      StepRecord r;
      r.t = s.at("t").get<int>();
      r.pose = fromRowMajor(s.at("pose"), 4, 4);
      r.u = fromRowMajor(s.at("u"), 6, 1);
      for (const auto& t : s.at("targets")) {
        TargetRecord tr;
        const auto n = static_cast<Eigen::Index>(t.at("mean").size());
        tr.mean = fromRowMajor(t.at("mean"), n, 1);
        tr.info = fromRowMajor(t.at("info"), n, n);
        if (t.contains("truth")) tr.truth = fromRowMajor(t.at("truth"), n, 1);
        tr.weight = t.at("weight").get<double>();
        tr.in_fov = t.at("in_fov").get<bool>();
        r.targets.push_back(std::move(tr));
      }
      trace.steps.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("trace: malformed document: ") + e.what());
  }
  return trace;
}

void writeCsv(std::ostream& out, const EpisodeTrace& trace) {
  const int ny = trace.steps.empty() || trace.steps.front().targets.empty()
                     ? 0
                     : static_cast<int>(trace.steps.front().targets.front().mean.size());
  out << "t,target,x,y,z,yaw,v,omega";
  for (int i = 0; i < ny; ++i) out << ",mean_" << i;
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < ny; ++c) out << ",info_" << r << c;
  out << ",weight,in_fov";
  for (int i = 0; i < ny; ++i) out << ",truth_" << i;
  out << '\n';
  for (const auto& s : trace.steps) {
    const double yaw = std::atan2(s.pose(1, 0), s.pose(0, 0));
    for (std::size_t j = 0; j < s.targets.size(); ++j) {
      const auto& t = s.targets[j];
      out << s.t << ',' << j << ',' << formatDouble(s.pose(0, 3)) << ',' << formatDouble(s.pose(1, 3)) << ','
          << formatDouble(s.pose(2, 3)) << ',' << formatDouble(yaw) << ',' << formatDouble(s.u(0)) << ','
          << formatDouble(s.u(5));
      for (int i = 0; i < ny; ++i) out << ',' << formatDouble(t.mean(i));
      for (int r = 0; r < ny; ++r)
        for (int c = 0; c < ny; ++c) out << ',' << formatDouble(t.info(r, c));
      out << ',' << formatDouble(t.weight) << ',' << (t.in_fov ? 1 : 0);
      for (int i = 0; i < ny; ++i) out << ',' << (i < t.truth.size() ? formatDouble(t.truth(i)) : "nan");
      out << '\n';
    }
  }
}

void save(const std::filesystem::path& json_path, const std::filesystem::path& csv_path, const EpisodeTrace& trace) {
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot open " + json_path.string() + " for writing");
  js << toJson(trace).dump(1) << '\n';
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
  writeCsv(csv, trace);
}

}  // namespace atpg::trace_io
