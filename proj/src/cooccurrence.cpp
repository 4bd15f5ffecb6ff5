#include "cftc/cooccurrence.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cftc/errors.hpp"

namespace cftc {

Mat compute_cooccurrence(const Corpus& corpus) {
  if (corpus.docs.empty()) throw ContractViolation("cooccurrence of empty corpus");
  const Index L = corpus.label_count();
  Mat joint = Mat::Zero(L, L);
  Vec count = Vec::Zero(L);
  for (const auto& doc : corpus.docs) {
    for (Index j = 0; j < L; ++j) {
      if (doc.labels[j] == 0) continue;
      count[j] += 1.0;
      for (Index i = 0; i < L; ++i) {
        if (doc.labels[i] != 0) joint(i, j) += 1.0;
      }
    }
  }
  Mat raw = Mat::Zero(L, L);
  for (Index j = 0; j < L; ++j) {
    if (count[j] > 0.0) raw.col(j) = joint.col(j) / count[j];
  }
  return raw;
}

Mat normalize_cooccurrence(const Mat& raw) {
  const Index L = raw.rows();
  Vec inv_sqrt(L);
  for (Index i = 0; i < L; ++i) {
    Scalar d = std::max(raw.row(i).sum(), kDegreeFloor);
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  return inv_sqrt.asDiagonal() * raw * inv_sqrt.asDiagonal();
}

CooccurrenceMatrix build_cooccurrence(const Corpus& corpus) {
  CooccurrenceMatrix out;
  out.raw = compute_cooccurrence(corpus);
  out.normalized = normalize_cooccurrence(out.raw);
  const Index L = out.raw.rows();
  out.degree = Vec(L);
  for (Index i = 0; i < L; ++i) {
    out.degree[i] = std::max(out.raw.row(i).sum(), kDegreeFloor);
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& labels, const Mat& m) {
  if (static_cast<Index>(labels.size()) != m.rows() || m.rows() != m.cols()) {
    throw ContractViolation("matrix/label size mismatch in csv export");
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write csv: " + path.string());
  for (const auto& name : labels) out << ',' << name;
  out << '\n';
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Mat read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open csv: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty csv: " + path.string());
  Index cols = 0;
  for (char c : header) {
    if (c == ',') ++cols;
  }
  std::vector<Scalar> values;
  std::string line;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // row label
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    ++rows;
  }
  if (rows * cols != static_cast<Index>(values.size())) {
    throw ParseError("ragged csv: " + path.string());
  }
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    }
  }
  return m;
}

}  // namespace cftc
