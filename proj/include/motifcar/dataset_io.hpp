#pragma once

// Dataset ingestion and persistence.
//
// Two formats:
//  * the public benchmark layout: <name>_A.txt (comma separated 1-based edge
//    pairs), <name>_graph_indicator.txt (graph id of node k on line k) and
//    <name>_graph_labels.txt (one label per graph);
//  * a single-file text dump ("MOTIFCAR-DATASET 1") that also carries the
//    split and the optional planted-motif role metadata.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "motifcar/error.hpp"
#include "motifcar/graph.hpp"

namespace motifcar {

struct LoadStats {
  int duplicate_edges = 0;
  int self_loops = 0;
  int asymmetric_edges = 0;  // listed in only one direction; symmetrized
};

namespace detail {

inline std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open file: " + p.string());
  return in;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline long parse_long(std::string_view s, const std::string& where) {
  const std::string t = trim(s);
  long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw DataError(where + ": expected an integer, got '" + t + "'");
  return v;
}

}  // namespace detail

/// Loads `<root>/<name>_{A,graph_indicator,graph_labels}.txt`.
///
/// File node ids are remapped to contiguous 0-based ids per graph in file
/// order. One-directional edges are symmetrized silently; duplicates and
/// self-loops are dropped and counted in `stats`. Labels are remapped to
/// 0..C-1 in ascending order of their file values. Every graph is placed in
/// the train split.
inline LabeledDataset load_dataset(const std::filesystem::path& root, const std::string& name,
                                   LoadStats* stats = nullptr) {
  const auto a_path = root / (name + "_A.txt");
  const auto ind_path = root / (name + "_graph_indicator.txt");
  const auto lab_path = root / (name + "_graph_labels.txt");
  for (const auto& p : {a_path, ind_path, lab_path})
    if (!std::filesystem::exists(p)) throw DataError("missing dataset file: " + p.string());

  std::vector<long> raw_labels;
  {
    auto in = detail::open_or_throw(lab_path);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (detail::trim(line).empty()) continue;
      raw_labels.push_back(detail::parse_long(line, lab_path.filename().string() + ":" + std::to_string(ln)));
    }
  }
  const auto graph_count = static_cast<long>(raw_labels.size());

  // node_graph[k] = 0-based graph of file node k+1; node_local[k] = its local id.
  std::vector<int> node_graph, node_local;
  std::vector<int> sizes(static_cast<std::size_t>(graph_count), 0);
  {
    auto in = detail::open_or_throw(ind_path);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (detail::trim(line).empty()) continue;
      const long gid = detail::parse_long(line, ind_path.filename().string() + ":" + std::to_string(ln));
      if (gid < 1 || gid > graph_count)
        throw DataError(ind_path.filename().string() + ":" + std::to_string(ln) + ": graph id " +
                        std::to_string(gid) + " has no label line");
      node_graph.push_back(static_cast<int>(gid - 1));
      node_local.push_back(sizes[static_cast<std::size_t>(gid - 1)]++);
    }
  }

  LabeledDataset ds;
  ds.name = name;
  ds.graphs.reserve(sizes.size());
  for (int s : sizes) ds.graphs.emplace_back(s);

  LoadStats local;
  std::set<std::pair<long, long>> directed;
  {
    auto in = detail::open_or_throw(a_path);
    std::string line;
    int ln = 0;
    const long node_count = static_cast<long>(node_graph.size());
    while (std::getline(in, line)) {
      ++ln;
      if (detail::trim(line).empty()) continue;
      const std::string where = a_path.filename().string() + ":" + std::to_string(ln);
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw DataError(where + ": expected 'u, v'");
      const long u = detail::parse_long(std::string_view(line).substr(0, comma), where);
      const long v = detail::parse_long(std::string_view(line).substr(comma + 1), where);
      for (long x : {u, v})
        if (x < 1 || x > node_count)
          throw DataError(where + ": edge references node " + std::to_string(x) + " not assigned to any graph");
      const int gu = node_graph[static_cast<std::size_t>(u - 1)];
      if (gu != node_graph[static_cast<std::size_t>(v - 1)])
        throw DataError(where + ": edge joins nodes of different graphs");
      if (u == v) {
        ++local.self_loops;
        continue;
      }
      if (!directed.emplace(u, v).second) {
        ++local.duplicate_edges;
        continue;
      }
      ds.graphs[static_cast<std::size_t>(gu)].add_edge(node_local[static_cast<std::size_t>(u - 1)],
                                                        node_local[static_cast<std::size_t>(v - 1)]);
    }
  }
  for (auto [u, v] : directed)
    if (!directed.count({v, u})) ++local.asymmetric_edges;
  if (stats) *stats = local;

  std::vector<long> uniq = raw_labels;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (long l : raw_labels)
    ds.labels.push_back(static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), l) - uniq.begin()));
  ds.anomaly_class = 0;
  ds.put_all_in_train();
  return ds;
}

/// Writes `ds` in the benchmark layout; labels are written as-is.
inline void write_tu_dataset(const LabeledDataset& ds, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::ofstream a(root / (ds.name + "_A.txt")), ind(root / (ds.name + "_graph_indicator.txt")),
      lab(root / (ds.name + "_graph_labels.txt"));
  if (!a || !ind || !lab) throw DataError("cannot write dataset under " + root.string());
  long offset = 0;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    for (int v = 0; v < g.n(); ++v) ind << gi + 1 << '\n';
    for (int i = 0; i < g.n(); ++i)
      for (int j = 0; j < g.n(); ++j)
        if (g.has_edge(i, j)) a << offset + i + 1 << ", " << offset + j + 1 << '\n';
    lab << ds.labels[gi] << '\n';
    offset += g.n();
  }
}

inline constexpr const char* kDatasetMagic = "MOTIFCAR-DATASET";
inline constexpr int kDatasetVersion = 1;

/// Single-file dump. Schema (whitespace separated tokens, one record per line):
///   MOTIFCAR-DATASET 1
///   name <name>
///   anomaly_class <c>
///   graphs <N>
///   graph <n> <label> <m>       then m lines "u v" (0-based, u < v)
///   roles <r_0> ... <r_{n-1}>   or "roles -" when absent
///   split train <k> <ids...>    likewise validation, test
///   end
inline void write_dataset(std::ostream& out, const LabeledDataset& ds) {
  out << kDatasetMagic << ' ' << kDatasetVersion << '\n';
  out << "name " << (ds.name.empty() ? "-" : ds.name) << '\n';
  out << "anomaly_class " << ds.anomaly_class << '\n';
  out << "graphs " << ds.graphs.size() << '\n';
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    const auto edges = g.edges();
    out << "graph " << g.n() << ' ' << ds.labels[gi] << ' ' << edges.size() << '\n';
    for (auto [u, v] : edges) out << u << ' ' << v << '\n';
    out << "roles";
    if (ds.roles.empty()) {
      out << " -";
    } else {
      for (auto r : ds.roles[gi]) out << ' ' << static_cast<int>(r);
    }
    out << '\n';
  }
  auto write_part = [&](const char* tag, const std::vector<int>& ids) {
    out << "split " << tag << ' ' << ids.size();
    for (int i : ids) out << ' ' << i;
    out << '\n';
  };
  write_part("train", ds.split.train);
  write_part("validation", ds.split.validation);
  write_part("test", ds.split.test);
  out << "end\n";
}

inline LabeledDataset read_dataset(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw DataError("dataset file: expected '" + word + "', got '" + tok + "'");
  };
  auto read_int = [&](const char* what) {
    long v;
    if (!(in >> v)) throw DataError(std::string("dataset file: expected integer for ") + what);
    return v;
  };
  expect(kDatasetMagic);
  const long version = read_int("version");
  if (version != kDatasetVersion) throw DataError("dataset file: unsupported version " + std::to_string(version));
  LabeledDataset ds;
  expect("name");
  in >> ds.name;
  if (ds.name == "-") ds.name.clear();
  expect("anomaly_class");
  ds.anomaly_class = static_cast<int>(read_int("anomaly_class"));
  expect("graphs");
  const long count = read_int("graph count");
  if (count < 0) throw DataError("dataset file: negative graph count");
  bool has_roles = false;
  for (long gi = 0; gi < count; ++gi) {
    expect("graph");
    const long n = read_int("node count");
    const long label = read_int("label");
    const long m = read_int("edge count");
    if (n < 0 || m < 0) throw DataError("dataset file: negative size in graph " + std::to_string(gi));
    Graph g(static_cast<int>(n));
    for (long e = 0; e < m; ++e) {
      const long u = read_int("edge endpoint"), v = read_int("edge endpoint");
      if (u < 0 || v < 0 || u >= n || v >= n) throw DataError("dataset file: edge out of range in graph " + std::to_string(gi));
      g.add_edge(static_cast<int>(u), static_cast<int>(v));
    }
    ds.graphs.push_back(std::move(g));
    ds.labels.push_back(static_cast<int>(label));
    expect("roles");
    std::string first;
    in >> first;
    if (first == "-") {
      if (has_roles) throw DataError("dataset file: role metadata missing for graph " + std::to_string(gi));
      continue;
    }
    if (gi > 0 && !has_roles) throw DataError("dataset file: role metadata present only for some graphs");
    has_roles = true;
    std::vector<std::uint8_t> r;
    if (n > 0) r.push_back(static_cast<std::uint8_t>(detail::parse_long(first, "roles")));
    for (long k = 1; k < n; ++k) r.push_back(static_cast<std::uint8_t>(read_int("role")));
    ds.roles.push_back(std::move(r));
  }
  for (auto* part : {&ds.split.train, &ds.split.validation, &ds.split.test}) {
    expect("split");
    std::string tag;
    in >> tag;
    const long k = read_int("split size");
    for (long i = 0; i < k; ++i) part->push_back(static_cast<int>(read_int("split index")));
  }
  expect("end");
  ds.validate();
  return ds;
}

inline void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(out, ds);
}

inline LabeledDataset load_dataset_file(const std::filesystem::path& path) {
  auto in = detail::open_or_throw(path);
  return read_dataset(in);
}

}  // namespace motifcar
