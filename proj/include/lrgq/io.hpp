#pragma once

// Plain-text formats.
//
//   matrix CSV   header-free rows of numbers; NaN (or an empty field) marks an unobserved entry
//   mask CSV     0/1 entries
//   edge list    header "i,j,theta_ij", 1-based node ids, i < j
//   manifest     one block per line: "<csv path> <id>,<id>,..." with 1-based ids;
//                paths are relative to the manifest; '#' starts a comment

#include "lrgq/core.hpp"
#include "lrgq/cov_estimate.hpp"

#include <filesystem>

namespace lrgq {

struct ParseError : Error {
  ParseError(std::string file, Index line, const std::string& message)
      : Error("parse", file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line),
        message_(message) {}
  const std::string& file() const { return file_; }
  Index line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::string file_;
  Index line_;
  std::string message_;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

/// Number formatting used by every writer: shortest round-trip decimal via %.17g.
std::string format_number(double v);

Matrix<double> read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix<double>& m);

MaskMatrix read_mask_csv(const std::filesystem::path& path);
void write_mask_csv(const std::filesystem::path& path, const MaskMatrix& mask);

struct WeightedEdge {
  Index i = 0;  // 0-based
  Index j = 0;
  double weight = 0;
};

std::vector<WeightedEdge> read_edge_list(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, const EdgeSet& edges, const Matrix<double>* theta = nullptr);
EdgeSet edges_of(const std::vector<WeightedEdge>& weighted);

BlockData<double> read_manifest(const std::filesystem::path& path, std::optional<Index> p = std::nullopt);
void write_manifest(const std::filesystem::path& dir, const std::string& name, const BlockData<double>& data);

/// Observed covariance from a matrix CSV and an optional mask CSV. Without a
/// mask the finite entries are observed. The block design is recovered from the mask.
ObservedCovariance<double> read_observed_covariance(const std::filesystem::path& values,
                                                    const std::optional<std::filesystem::path>& mask);

}  // namespace lrgq
