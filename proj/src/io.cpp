#include "lrgq/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace lrgq {
namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& field, const std::string& file, Index line) {
  if (field.empty() || field == "NaN" || field == "nan" || field == "NA" || field == "na")
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE)
    throw ParseError(file, line, "not a number: '" + field + "'");
  return v;
}

Index parse_index(const std::string& field, const std::string& file, Index line) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (field.empty() || end == field.c_str() || *end != '\0' || errno == ERANGE)
    throw ParseError(file, line, "not an integer: '" + field + "'");
  return static_cast<Index>(v);
}

bool skippable(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Matrix<double> read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  const std::string file = path.string();
  std::vector<std::vector<double>> rows;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::vector<double> row;
    for (const auto& f : split(line, ',')) row.push_back(parse_number(f, file, lineno));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(file, lineno, "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                         std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(file, lineno, "no data rows");
  Matrix<double> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_matrix_csv(const fs::path& path, const Matrix<double>& m) {
  auto out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

MaskMatrix read_mask_csv(const fs::path& path) {
  const Matrix<double> raw = read_matrix_csv(path);
  MaskMatrix mask(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.rows(); ++i)
    for (Index j = 0; j < raw.cols(); ++j) {
      const double v = raw(i, j);
      if (v != 0.0 && v != 1.0)
        throw ParseError(path.string(), i + 1, "mask entries must be 0 or 1");
      mask(i, j) = v == 1.0;
    }
  return mask;
}

void write_mask_csv(const fs::path& path, const MaskMatrix& mask) {
  auto out = open_out(path);
  for (Index i = 0; i < mask.rows(); ++i) {
    for (Index j = 0; j < mask.cols(); ++j) {
      if (j) out << ',';
      out << (mask(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

std::vector<WeightedEdge> read_edge_list(const fs::path& path) {
  auto in = open_in(path);
  const std::string file = path.string();
  std::vector<WeightedEdge> out;
  std::string line;
  Index lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto fields = split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.size() >= 2 && fields[0] == "i" && fields[1] == "j") continue;
    }
    if (fields.size() < 2 || fields.size() > 3) throw ParseError(file, lineno, "expected i,j[,theta_ij]");
    const Index i = parse_index(fields[0], file, lineno), j = parse_index(fields[1], file, lineno);
    if (i < 1 || j < 1) throw ParseError(file, lineno, "node ids are 1-based");
    if (i == j) throw ParseError(file, lineno, "self-loop");
    const double w = fields.size() == 3 ? parse_number(fields[2], file, lineno) : 1.0;
    out.push_back({std::min(i, j) - 1, std::max(i, j) - 1, w});
  }
  return out;
}

EdgeSet edges_of(const std::vector<WeightedEdge>& weighted) {
  EdgeSet out;
  for (const auto& e : weighted) out.push_back({e.i, e.j});
  return normalize_edges(std::move(out));
}

void write_edge_list(const fs::path& path, const EdgeSet& edges, const Matrix<double>* theta) {
  auto out = open_out(path);
  out << "i,j,theta_ij\n";
  for (const Edge& e : normalize_edges(edges))
    out << e.i + 1 << ',' << e.j + 1 << ',' << format_number(theta ? (*theta)(e.i, e.j) : 1.0) << '\n';
}

BlockData<double> read_manifest(const fs::path& path, std::optional<Index> p) {
  auto in = open_in(path);
  const std::string file = path.string();
  const fs::path base = path.parent_path();
  std::vector<BlockRecord<double>> blocks;
  Index max_id = 0;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const std::string t = trim(line);
    const auto space = t.find_first_of(" \t");
    if (space == std::string::npos) throw ParseError(file, lineno, "expected '<csv path> <ids>'");
    const fs::path csv = base / trim(t.substr(0, space));
    std::vector<Index> ids;
    for (const auto& f : split(trim(t.substr(space + 1)), ',')) {
      const Index id = parse_index(f, file, lineno);
      if (id < 1) throw ParseError(file, lineno, "node ids are 1-based");
      ids.push_back(id - 1);
      max_id = std::max(max_id, id);
    }
    Matrix<double> data;
    try {
      data = read_matrix_csv(csv);
    } catch (const IoError& e) {
      throw ParseError(file, lineno, e.what());
    }
    if (data.cols() != static_cast<Index>(ids.size()))
      throw ParseError(file, lineno, "block file has " + std::to_string(data.cols()) + " columns but " +
                                         std::to_string(ids.size()) + " node ids");
    if (!data.allFinite()) throw ParseError(csv.string(), 0, "block data must be finite");
    blocks.push_back({std::move(data), std::move(ids)});
  }
  if (blocks.empty()) throw ParseError(file, lineno, "manifest lists no blocks");
  return BlockData<double>(p.value_or(max_id), std::move(blocks));
}

void write_manifest(const fs::path& dir, const std::string& name, const BlockData<double>& data) {
  fs::create_directories(dir);
  auto out = open_out(dir / name);
  for (Index k = 0; k < data.num_blocks(); ++k) {
    const auto& b = data.blocks()[static_cast<std::size_t>(k)];
    const std::string csv = "block_" + std::to_string(k + 1) + ".csv";
    write_matrix_csv(dir / csv, b.data);
    out << csv << ' ';
    for (std::size_t a = 0; a < b.node_ids.size(); ++a) out << (a ? "," : "") << b.node_ids[a] + 1;
    out << '\n';
  }
}

ObservedCovariance<double> read_observed_covariance(const fs::path& values,
                                                    const std::optional<fs::path>& mask_path) {
  Matrix<double> m = read_matrix_csv(values);
  if (m.rows() != m.cols()) throw ParseError(values.string(), 0, "covariance must be square");
  MaskMatrix mask;
  if (mask_path) {
    mask = read_mask_csv(*mask_path);
    if (mask.rows() != m.rows() || mask.cols() != m.cols())
      throw ParseError(mask_path->string(), 0, "mask shape differs from the covariance");
  } else {
    mask = m.array().isFinite();
  }
  return ObservedCovariance<double>(std::move(m), BlockDesign::from_mask(mask));
}

}  // namespace lrgq
