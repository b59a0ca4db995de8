#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "metrics.hpp"
#include "voting.hpp"

namespace gcanfuse {

inline constexpr const char* kPredictionHeader =
    "id\tp_shm\tp_ste\tp_obj\tp_vio\tp_mis\tlabel_shm\tlabel_ste\tlabel_obj\tlabel_vio\tlabel_mis";

/// Per-sample probabilities and thresholded labels. probs has four columns
/// (Setup B, mis derived by max / OR) or one column (Setup A, sub-class
/// columns written as NA).
struct Predictions {
  std::vector<std::string> ids;
  ProbMatrix probs;
  LabelMatrix labels;

  bool has_subclasses() const { return probs.cols() == 4; }

  ProbMatrix mis_probs() const { return has_subclasses() ? derive_taskA(probs) : probs; }
  LabelMatrix mis_labels() const { return has_subclasses() ? derive_taskA(labels) : labels; }
};

inline void write_predictions(const std::string& path, const Predictions& p) {
  if (static_cast<Eigen::Index>(p.ids.size()) != p.probs.rows() ||
      p.labels.rows() != p.probs.rows() || p.labels.cols() != p.probs.cols())
    throw UsageError("write_predictions: ids, probabilities and labels disagree");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write predictions " + path);
  out << kPredictionHeader << '\n' << std::setprecision(17);
  ProbMatrix pm = p.mis_probs();
  LabelMatrix lm = p.mis_labels();
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    auto r = static_cast<Eigen::Index>(i);
    out << p.ids[i];
    for (int c = 0; c < 4; ++c) {
      out << '\t';
      if (p.has_subclasses()) out << p.probs(r, c);
      else out << "NA";
    }
    out << '\t' << pm(r, 0);
    for (int c = 0; c < 4; ++c) {
      out << '\t';
      if (p.has_subclasses()) out << p.labels(r, c);
      else out << "NA";
    }
    out << '\t' << lm(r, 0) << '\n';
  }
}

inline Predictions read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read predictions " + path);
  std::string line;
  if (!std::getline(in, line) || line != kPredictionHeader)
    throw DataError(path + ":1: bad predictions header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    if (f.size() != 11)
      throw DataError(path + ":" + std::to_string(rows.size() + 2) + ": expected 11 fields");
    rows.push_back(std::move(f));
  }
  Predictions p;
  const bool sub = !rows.empty() && rows[0][1] != "NA";
  const Eigen::Index n = sub ? 4 : 1;
  p.probs.resize(static_cast<Eigen::Index>(rows.size()), n);
  p.labels.resize(static_cast<Eigen::Index>(rows.size()), n);
  try {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto r = static_cast<Eigen::Index>(i);
      p.ids.push_back(rows[i][0]);
      if (sub) {
        for (int c = 0; c < 4; ++c) {
          p.probs(r, c) = std::stod(rows[i][1 + c]);
          p.labels(r, c) = std::stoi(rows[i][6 + c]);
        }
      } else {
        p.probs(r, 0) = std::stod(rows[i][5]);
        p.labels(r, 0) = std::stoi(rows[i][10]);
      }
    }
  } catch (const std::exception&) {
    throw DataError(path + ": malformed numeric field");
  }
  return p;
}

/// Two-column `fold<TAB>f1` file with header.
inline void write_fold_scores(const std::string& path, const std::vector<double>& f1) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "fold\tf1\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f1.size(); ++i) out << i << '\t' << f1[i] << '\n';
}

inline std::vector<double> read_fold_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "fold\tf1") throw DataError(path + ":1: bad header");
  std::vector<double> out;
  std::size_t fold;
  double f1;
  while (in >> fold >> f1) out.push_back(f1);
  if (!in.eof()) throw DataError(path + ": malformed score row");
  return out;
}

}  // namespace gcanfuse
