// Text formats: g2o pose graphs, TUM trajectories, binning masks and
// feature-track CSV streams.
//
// Numbers are written with 17 significant digits, so parse(write(x)) == x
// value for value.
#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/evaluation.hpp"
#include "rpgo/factor_graph.hpp"
#include "rpgo/frontend.hpp"

namespace rpgo {

// ---------------------------------------------------------------------------
// Low-level helpers.
// ---------------------------------------------------------------------------
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path);
}

namespace detail {

inline std::vector<std::string_view> split_tokens(std::string_view line, char sep = 0) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [&](char c) { return sep ? c == sep : (c == ' ' || c == '\t' || c == '\r'); };
  if (sep) {
    std::size_t start = 0;
    for (; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == sep) {
        std::string_view tok = line.substr(start, i - start);
        while (!tok.empty() && (tok.back() == '\r' || tok.back() == ' ')) tok.remove_suffix(1);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        out.push_back(tok);
        start = i + 1;
      }
    }
    return out;
  }
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view tok, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "invalid integer '" + std::string(tok) + "'");
  }
  return v;
}

// Calls fn(line_number, line) for every line, 1-based.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!(nl == std::string_view::npos && line.empty())) fn(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

inline Rotation3 quaternion_from_file(double qx, double qy, double qz, double qw, std::size_t line) {
  const double n = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
  if (std::abs(n - 1.0) > 1e-3) {
    throw ParseError(line, "quaternion norm " + format_double(n) + " deviates from 1 by more than 1e-3");
  }
  return Rotation3::from_quaternion(qw, qx, qy, qz);
}

inline void append_pose3(std::string& s, const Pose3& p) {
  const auto& t = p.translation();
  const auto& r = p.rotation();
  for (double v : {t.x(), t.y(), t.z(), r.x(), r.y(), r.z(), r.w()}) {
    s += ' ';
    s += format_double(v);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// g2o.
// ---------------------------------------------------------------------------

// g2o orders tangent coordinates translation first ([x y theta] or
// [x y z rx ry rz]); internally rotation comes first. The permutation maps
// internal index -> g2o index.
template <int N>
constexpr std::array<int, N> g2o_permutation() {
  if constexpr (N == 3) {
    return {2, 0, 1};
  } else {
    return {3, 4, 5, 0, 1, 2};
  }
}

template <PoseType P>
struct G2oEdge {
  static constexpr int kUpper = P::kDof * (P::kDof + 1) / 2;

  Key from = 0;
  Key to = 0;
  P measurement;
  std::array<double, kUpper> info_upper{};  // g2o order, upper triangle row-major

  // Information matrix in the internal (rotation-first) ordering.
  Matrix<P::kDof> information() const {
    constexpr int N = P::kDof;
    Matrix<N> g = Matrix<N>::Zero();
    int k = 0;
    for (int r = 0; r < N; ++r) {
      for (int c = r; c < N; ++c) {
        g(r, c) = info_upper[k];
        g(c, r) = info_upper[k];
        ++k;
      }
    }
    constexpr auto perm = g2o_permutation<N>();
    Matrix<N> out;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) out(i, j) = g(perm[i], perm[j]);
    }
    return out;
  }

  void set_information(const Matrix<P::kDof>& info) {
    constexpr int N = P::kDof;
    constexpr auto perm = g2o_permutation<N>();
    Matrix<N> g;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) g(perm[i], perm[j]) = info(i, j);
    }
    int k = 0;
    for (int r = 0; r < N; ++r) {
      for (int c = r; c < N; ++c) info_upper[k++] = g(r, c);
    }
  }

  bool operator==(const G2oEdge& o) const {
    return from == o.from && to == o.to && measurement == o.measurement && info_upper == o.info_upper;
  }
};

template <PoseType P>
struct G2oGraph {
  std::map<Key, P> vertices;
  std::vector<G2oEdge<P>> edges;
  std::map<std::size_t, bool> labels;  // edge index -> inlier

  bool operator==(const G2oGraph&) const = default;
};

using G2oDocument = std::variant<G2oGraph<Pose2>, G2oGraph<Pose3>>;

struct G2oParseResult {
  G2oDocument document;
  std::size_t skipped_records = 0;  // unknown record types
};

inline Dimension dimension_of(const G2oDocument& doc) {
  return std::holds_alternative<G2oGraph<Pose2>>(doc) ? Dimension::SE2 : Dimension::SE3;
}

inline G2oParseResult parse_g2o(std::string_view text) {
  G2oGraph<Pose2> g2;
  G2oGraph<Pose3> g3;
  std::optional<Dimension> dim;
  std::size_t skipped = 0;
  auto set_dim = [&](Dimension d, std::size_t line) {
    if (dim && *dim != d) throw ParseError(line, "mixed SE2 and SE3 records");
    dim = d;
  };
  auto expect = [](const std::vector<std::string_view>& tok, std::size_t n, std::size_t line) {
    if (tok.size() != n) {
      throw ParseError(line, std::string(tok[0]) + " expects " + std::to_string(n - 1) +
                                 " fields, got " + std::to_string(tok.size() - 1));
    }
  };
  detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
    const auto tok = detail::split_tokens(raw);
    if (tok.empty()) return;
    if (tok[0].front() == '#') {
      if (tok.size() >= 2 && tok[0] == "#" && tok[1] == "LABEL") {
        if (tok.size() != 4) throw ParseError(line, "LABEL expects '# LABEL index inlier|outlier'");
        const auto idx = detail::parse_int<std::size_t>(tok[2], line);
        if (tok[3] != "inlier" && tok[3] != "outlier") {
          throw ParseError(line, "LABEL must be inlier or outlier");
        }
        const bool inl = tok[3] == "inlier";
        if (dim == Dimension::SE2) {
          g2.labels[idx] = inl;
        } else {
          g3.labels[idx] = inl;
        }
      }
      return;
    }
    const std::string_view type = tok[0];
    auto num = [&](std::size_t i) { return detail::parse_double(tok[i], line); };
    if (type == "VERTEX_SE2") {
      set_dim(Dimension::SE2, line);
      expect(tok, 5, line);
      const Key id = detail::parse_int<Key>(tok[1], line);
      if (!g2.vertices.emplace(id, Pose2(num(2), num(3), num(4))).second) {
        throw ParseError(line, "duplicate vertex id " + std::to_string(id));
      }
    } else if (type == "VERTEX_SE3:QUAT") {
      set_dim(Dimension::SE3, line);
      expect(tok, 9, line);
      const Key id = detail::parse_int<Key>(tok[1], line);
      const Pose3 p(detail::quaternion_from_file(num(5), num(6), num(7), num(8), line),
                    Vector3(num(2), num(3), num(4)));
      if (!g3.vertices.emplace(id, p).second) {
        throw ParseError(line, "duplicate vertex id " + std::to_string(id));
      }
    } else if (type == "EDGE_SE2") {
      set_dim(Dimension::SE2, line);
      expect(tok, 12, line);
      G2oEdge<Pose2> e;
      e.from = detail::parse_int<Key>(tok[1], line);
      e.to = detail::parse_int<Key>(tok[2], line);
      e.measurement = Pose2(num(3), num(4), num(5));
      for (int k = 0; k < 6; ++k) e.info_upper[k] = num(6 + k);
      g2.edges.push_back(e);
    } else if (type == "EDGE_SE3:QUAT") {
      set_dim(Dimension::SE3, line);
      expect(tok, 31, line);
      G2oEdge<Pose3> e;
      e.from = detail::parse_int<Key>(tok[1], line);
      e.to = detail::parse_int<Key>(tok[2], line);
      e.measurement = Pose3(detail::quaternion_from_file(num(6), num(7), num(8), num(9), line),
                            Vector3(num(3), num(4), num(5)));
      for (int k = 0; k < 21; ++k) e.info_upper[k] = num(10 + k);
      g3.edges.push_back(e);
    } else {
      ++skipped;
    }
  });
  G2oParseResult res;
  if (dim == Dimension::SE2) {
    res.document = std::move(g2);
  } else {
    res.document = std::move(g3);
  }
  res.skipped_records = skipped;
  return res;
}

template <PoseType P>
std::string write_g2o(const G2oGraph<P>& g) {
  std::string s;
  for (const auto& [id, p] : g.vertices) {
    if constexpr (P::kDof == 3) {
      s += "VERTEX_SE2 " + std::to_string(id) + ' ' + format_double(p.x()) + ' ' +
           format_double(p.y()) + ' ' + format_double(p.theta());
    } else {
      s += "VERTEX_SE3:QUAT " + std::to_string(id);
      detail::append_pose3(s, p);
    }
    s += '\n';
  }
  for (const auto& e : g.edges) {
    if constexpr (P::kDof == 3) {
      s += "EDGE_SE2 " + std::to_string(e.from) + ' ' + std::to_string(e.to) + ' ' +
           format_double(e.measurement.x()) + ' ' + format_double(e.measurement.y()) + ' ' +
           format_double(e.measurement.theta());
    } else {
      s += "EDGE_SE3:QUAT " + std::to_string(e.from) + ' ' + std::to_string(e.to);
      detail::append_pose3(s, e.measurement);
    }
    for (double v : e.info_upper) {
      s += ' ';
      s += format_double(v);
    }
    s += '\n';
  }
  for (const auto& [idx, inlier] : g.labels) {
    s += "# LABEL " + std::to_string(idx) + (inlier ? " inlier\n" : " outlier\n");
  }
  return s;
}

inline std::string write_g2o(const G2oDocument& doc) {
  return std::visit([](const auto& g) { return write_g2o(g); }, doc);
}

// Consecutive ids become odometry, all other edges loop closures. A prior on
// the smallest vertex id fixes the gauge.
template <PoseType P>
PoseGraph<P> to_pose_graph(const G2oGraph<P>& g, double prior_information = 1e6) {
  PoseGraph<P> graph;
  for (const auto& [id, p] : g.vertices) graph.add_variable(id, p);
  for (const auto& e : g.edges) {
    const FactorKind kind = (e.to == e.from + 1) ? FactorKind::Odometry : FactorKind::LoopClosure;
    graph.add_factor(Factor<P>::between(kind, e.from, e.to, e.measurement,
                                        NoiseModel<P::kDof>::from_information(e.information())));
  }
  if (!g.vertices.empty()) {
    const auto& [id, p] = *g.vertices.begin();
    graph.add_prior(id, p, NoiseModel<P::kDof>::isotropic(prior_information));
  }
  return graph;
}

// Relative-pose factors of a graph as g2o edges; priors are not written.
template <PoseType P>
G2oGraph<P> to_g2o(const PoseGraph<P>& graph) {
  G2oGraph<P> g;
  g.vertices = graph.initial_values();
  for (const auto& f : graph.factors()) {
    if (f.unary()) continue;
    G2oEdge<P> e;
    e.from = f.key1;
    e.to = f.key2;
    e.measurement = f.measurement;
    e.set_information(f.noise.information());
    g.edges.push_back(e);
  }
  return g;
}

// ---------------------------------------------------------------------------
// TUM trajectories: "timestamp tx ty tz qx qy qz qw".
// ---------------------------------------------------------------------------
struct TumParseResult {
  std::vector<TimedPose> poses;
  std::size_t non_monotone = 0;  // timestamps not greater than their predecessor
};

inline TumParseResult parse_tum(std::string_view text) {
  TumParseResult res;
  detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
    const auto tok = detail::split_tokens(raw);
    if (tok.empty() || tok[0].front() == '#') return;
    if (tok.size() != 8) {
      throw ParseError(line, "TUM record expects 8 fields, got " + std::to_string(tok.size()));
    }
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = detail::parse_double(tok[i], line);
    TimedPose tp{v[0], Pose3(detail::quaternion_from_file(v[4], v[5], v[6], v[7], line),
                             Vector3(v[1], v[2], v[3]))};
    if (!res.poses.empty() && !(tp.timestamp > res.poses.back().timestamp)) ++res.non_monotone;
    res.poses.push_back(tp);
  });
  return res;
}

inline std::string write_tum(std::span<const TimedPose> poses) {
  std::string s;
  for (const auto& tp : poses) {
    s += format_double(tp.timestamp);
    detail::append_pose3(s, tp.pose);
    s += '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Binning mask: "rows cols" then one line per row of "allow:quota" | "deny".
// ---------------------------------------------------------------------------
inline BinningMask parse_mask(std::string_view text) {
  BinningMask m;
  m.cells.clear();
  bool header = false;
  int row = 0;
  detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
    const auto tok = detail::split_tokens(raw);
    if (tok.empty()) return;
    if (!header) {
      if (tok.size() != 2) throw ParseError(line, "mask header expects 'rows cols'");
      m.rows = detail::parse_int<int>(tok[0], line);
      m.cols = detail::parse_int<int>(tok[1], line);
      if (m.rows < 1 || m.cols < 1) throw ParseError(line, "mask grid must be at least 1x1");
      header = true;
      return;
    }
    if (row >= m.rows) throw ParseError(line, "mask has more rows than declared");
    if (tok.size() != static_cast<std::size_t>(m.cols)) {
      throw ParseError(line, "mask row expects " + std::to_string(m.cols) + " cells");
    }
    for (auto t : tok) {
      if (t == "deny") {
        m.cells.push_back({false, 0});
      } else if (t.substr(0, 6) == "allow:") {
        const int q = detail::parse_int<int>(t.substr(6), line);
        if (q < 0) throw ParseError(line, "quota must be >= 0");
        m.cells.push_back({true, q});
      } else {
        throw ParseError(line, "mask cell must be 'allow:quota' or 'deny'");
      }
    }
    ++row;
  });
  if (!header) throw ParseError(1, "empty mask file");
  if (row != m.rows) throw ParseError(0, "mask has fewer rows than declared");
  return m;
}

inline std::string write_mask(const BinningMask& m) {
  m.validate();
  std::string s = std::to_string(m.rows) + ' ' + std::to_string(m.cols) + '\n';
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const auto& cell = m.at(r, c);
      if (c) s += ' ';
      s += cell.allowed ? "allow:" + std::to_string(cell.quota) : std::string("deny");
    }
    s += '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Feature stream CSV: header "timestamp,track_id,x,y,response"; rows with the
// same timestamp form one frame.
// ---------------------------------------------------------------------------
inline constexpr std::string_view kFeatureCsvHeader = "timestamp,track_id,x,y,response";

inline std::vector<TrackedFeatureFrame> parse_feature_csv(std::string_view text,
                                                          const ImageSize& image_size) {
  std::vector<TrackedFeatureFrame> frames;
  bool header = false;
  detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
    if (detail::split_tokens(raw).empty()) return;
    if (!header) {
      if (raw != kFeatureCsvHeader) {
        throw ParseError(line, "feature CSV header must be '" + std::string(kFeatureCsvHeader) + "'");
      }
      header = true;
      return;
    }
    const auto tok = detail::split_tokens(raw, ',');
    if (tok.size() != 5) throw ParseError(line, "feature row expects 5 fields");
    const double t = detail::parse_double(tok[0], line);
    Keypoint k;
    k.track_id = detail::parse_int<TrackId>(tok[1], line);
    k.position = Vector2(detail::parse_double(tok[2], line), detail::parse_double(tok[3], line));
    k.response = detail::parse_double(tok[4], line);
    if (frames.empty() || frames.back().timestamp != t) {
      if (!frames.empty() && !(t > frames.back().timestamp)) {
        throw ParseError(line, "feature timestamps must be non-decreasing");
      }
      frames.push_back({t, {}, image_size});
    }
    frames.back().keypoints.push_back(k);
  });
  if (!header) throw ParseError(1, "missing feature CSV header");
  return frames;
}

inline std::string write_feature_csv(std::span<const TrackedFeatureFrame> frames) {
  std::string s(kFeatureCsvHeader);
  s += '\n';
  for (const auto& f : frames) {
    for (const auto& k : f.keypoints) {
      s += format_double(f.timestamp) + ',' + std::to_string(k.track_id) + ',' +
           format_double(k.position.x()) + ',' + format_double(k.position.y()) + ',' +
           format_double(k.response) + '\n';
    }
  }
  return s;
}

}  // namespace rpgo
