#include "efex/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace efex {
namespace {

constexpr const char* kModelFormat = "efex-model/1";

template <class T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  if (r.ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, r.ptr);
}

Json env_to_json(const GroundTruthGraph& g) {
  Json j;
  j["n_actions"] = g.n_actions();
  j["n_nodes"] = g.n_nodes();
  j["n_observations"] = g.n_observations;
  j["emission"] = g.emission;
  Json transitions = Json::array();
  Json boundary = Json::array();
  for (int a = 0; a < g.n_actions(); ++a) {
    for (int z = 0; z < g.n_nodes(); ++z) {
      const auto row = g.transition.row(a, z);
      for (int d = 0; d < g.n_nodes(); ++d) {
        if (row[d] > 0.0) transitions.push_back(Json::array({a, z, d, row[d]}));
      }
      if (g.is_boundary(a, z)) boundary.push_back(Json::array({a, z}));
    }
  }
  j["transitions"] = std::move(transitions);
  j["home"] = g.home;
  j["boundary"] = std::move(boundary);
  if (g.layout) j["layout"] = {{"rows", g.layout->rows}, {"cols", g.layout->cols}, {"cell", g.layout->cell}};
  return j;
}

GroundTruthGraph env_from_json(const Json& j) {
  GroundTruthGraph g;
  const int na = get<int>(j, "n_actions");
  const int n = get<int>(j, "n_nodes");
  if (na < 1 || n < 1) throw std::invalid_argument("env: n_actions and n_nodes must be positive");
  g.n_observations = get<int>(j, "n_observations");
  g.emission = get<std::vector<int>>(j, "emission");
  g.home = get<int>(j, "home");
  g.transition = TransitionTensor(na, n, 0.0);
  for (const auto& t : j.at("transitions")) {
    const int a = t.at(0).get<int>(), z = t.at(1).get<int>(), d = t.at(2).get<int>();
    if (a < 0 || a >= na || z < 0 || z >= n || d < 0 || d >= n) throw std::invalid_argument("env: transition index");
    g.transition(a, z, d) = t.at(3).get<double>();
  }
  g.boundary.assign(static_cast<std::size_t>(na) * n, 0);
  if (j.contains("boundary")) {
    for (const auto& b : j.at("boundary")) {
      const int a = b.at(0).get<int>(), z = b.at(1).get<int>();
      if (a < 0 || a >= na || z < 0 || z >= n) throw std::invalid_argument("env: boundary index");
      g.boundary[static_cast<std::size_t>(a) * n + z] = 1;
    }
  }
  if (j.contains("layout")) {
    const Json& l = j.at("layout");
    g.layout = GridLayout{get<int>(l, "rows"), get<int>(l, "cols"), get<std::vector<int>>(l, "cell")};
  }
  g.validate();
  return g;
}

Json model_to_json(const LearnedModel& model, const CloneAllocation& allocation) {
  Json j;
  j["format"] = kModelFormat;
  j["n_actions"] = model.n_actions();
  j["clones_per_obs"] = allocation.clones_per_obs();
  j["pseudocount"] = model.pseudocount;
  j["initial"] = model.initial;
  Json fills = Json::array();
  Json entries = Json::array();
  for (int a = 0; a < model.n_actions(); ++a) {
    for (int z = 0; z < model.n_clones(); ++z) {
      const auto row = model.transition.row(a, z);
      const double fill = *std::min_element(row.begin(), row.end());
      fills.push_back(Json::array({a, z, fill}));
      for (int d = 0; d < model.n_clones(); ++d) {
        if (row[d] != fill) entries.push_back(Json::array({a, z, d, row[d]}));
      }
    }
  }
  j["row_fill"] = std::move(fills);
  j["transitions"] = std::move(entries);
  return j;
}

std::pair<LearnedModel, CloneAllocation> model_from_json(const Json& j) {
  if (get<std::string>(j, "format") != kModelFormat) throw std::invalid_argument("model: unsupported format");
  CloneAllocation alloc(get<std::vector<int>>(j, "clones_per_obs"));
  const int na = get<int>(j, "n_actions");
  const int n = alloc.n_clones();
  if (na < 1) throw std::invalid_argument("model: n_actions must be positive");
  LearnedModel m;
  m.pseudocount = get<double>(j, "pseudocount");
  m.initial = get<std::vector<double>>(j, "initial");
  m.transition = TransitionTensor(na, n, 0.0);
  for (const auto& f : j.at("row_fill")) {
    const int a = f.at(0).get<int>(), z = f.at(1).get<int>();
    if (a < 0 || a >= na || z < 0 || z >= n) throw std::invalid_argument("model: row_fill index");
    auto row = m.transition.row(a, z);
    std::fill(row.begin(), row.end(), f.at(2).get<double>());
  }
  for (const auto& t : j.at("transitions")) {
    const int a = t.at(0).get<int>(), z = t.at(1).get<int>(), d = t.at(2).get<int>();
    if (a < 0 || a >= na || z < 0 || z >= n || d < 0 || d >= n) throw std::invalid_argument("model: transition index");
    m.transition(a, z, d) = t.at(3).get<double>();
  }
  m.validate(alloc);
  return {std::move(m), std::move(alloc)};
}

Json counts_to_json(const CountTensor& counts) {
  Json out = Json::array();
  for (int a = 0; a < counts.n_actions(); ++a) {
    for (int z = 0; z < counts.n_states(); ++z) {
      const auto row = counts.row(a, z);
      for (int d = 0; d < counts.n_states(); ++d) {
        if (row[d] != 0.0) out.push_back(Json::array({a, z, d, row[d]}));
      }
    }
  }
  return out;
}

std::string model_to_dot(const LearnedModel& model, const CloneAllocation& allocation, double threshold) {
  std::ostringstream out;
  out << "digraph model {\n";
  for (int z = 0; z < model.n_clones(); ++z) {
    out << "  c" << z << " [label=\"" << z << ":" << allocation.observation_of(z) << "\"];\n";
  }
  for (int a = 0; a < model.n_actions(); ++a) {
    for (int z = 0; z < model.n_clones(); ++z) {
      const auto row = model.transition.row(a, z);
      for (int d = 0; d < model.n_clones(); ++d) {
        if (row[d] > threshold) {
          out << "  c" << z << " -> c" << d << " [label=\"" << a << "\", weight=" << format_double(row[d]) << "];\n";
        }
      }
    }
  }
  out << "}\n";
  return out.str();
}

void write_trace_csv(std::ostream& out, const MetricTrace& trace) {
  out << "step,ell,ell_se,wcov,prec,prec_se,seed,policy\n";
  for (const auto& r : trace.rows) {
    out << r.step << ',' << format_double(r.ell) << ',' << format_double(r.ell_se) << ',' << format_double(r.wcov)
        << ',' << format_double(r.prec) << ',' << format_double(r.prec_se) << ',' << r.seed << ',' << r.policy << '\n';
  }
}

MetricTrace read_trace_csv(std::istream& in) {
  MetricTrace trace;
  std::string line;
  if (!std::getline(in, line) || line != "step,ell,ell_se,wcov,prec,prec_se,seed,policy") {
    throw std::invalid_argument("trace csv: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw std::invalid_argument("trace csv: expected 8 columns");
    MetricRow r;
    r.step = std::stol(f[0]);
    r.ell = std::stod(f[1]);
    r.ell_se = std::stod(f[2]);
    r.wcov = std::stod(f[3]);
    r.prec = std::stod(f[4]);
    r.prec_se = std::stod(f[5]);
    r.seed = std::stoull(f[6]);
    r.policy = f[7];
    trace.rows.push_back(std::move(r));
  }
  return trace;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace efex
