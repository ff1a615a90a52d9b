#include "cossif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cossif/errors.hpp"

namespace cossif {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Argmax over the score map with class-name-ascending tie-breaking; the map
// already iterates in ascending key order, so strictly-greater wins keep the
// first of a tie.
std::string argmax_class(const std::map<std::string, double>& scores) {
  std::string best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [name, score] : scores) {
    if (score > best_score) {
      best = name;
      best_score = score;
    }
  }
  return best;
}

void validate_rows(const std::vector<PredictionRow>& rows) {
  if (rows.empty()) throw DataError("no prediction rows");
  const auto& universe = rows.front().scores;
  for (const auto& row : rows) {
    if (row.scores.size() != universe.size() ||
        !std::equal(row.scores.begin(), row.scores.end(), universe.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw DataError("row " + row.image_id + " does not share the label universe");
    }
    if (!row.scores.count(row.true_class)) {
      throw DataError("unknown true label " + row.true_class + " in row " + row.image_id);
    }
    if (!row.scores.count(row.predicted_class)) {
      throw DataError("unknown predicted label " + row.predicted_class + " in row " +
                      row.image_id);
    }
    if (argmax_class(row.scores) != row.predicted_class) {
      throw DataError("row " + row.image_id +
                      ": predicted_class is not the argmax of the scores");
    }
  }
}

}  // namespace

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read predictions: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty predictions file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 4 || header[0] != "image_id" || header[1] != "true_class" ||
      header[2] != "predicted_class") {
    throw DataError("predictions header must be image_id,true_class,predicted_class,"
                    "score:<class>,...");
  }
  std::vector<std::string> score_classes;
  for (std::size_t i = 3; i < header.size(); ++i) {
    if (header[i].rfind("score:", 0) != 0 || header[i].size() == 6) {
      throw DataError("bad score column: " + header[i]);
    }
    score_classes.push_back(header[i].substr(6));
  }

  std::vector<PredictionRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw DataError("predictions line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    PredictionRow row;
    row.image_id = fields[0];
    row.true_class = fields[1];
    row.predicted_class = fields[2];
    for (std::size_t i = 0; i < score_classes.size(); ++i) {
      try {
        row.scores[score_classes[i]] = std::stod(fields[3 + i]);
      } catch (const std::exception&) {
        throw DataError("predictions line " + std::to_string(line_no) + ": bad score " +
                        fields[3 + i]);
      }
    }
    rows.push_back(std::move(row));
  }
  validate_rows(rows);
  return rows;
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

std::int64_t ConfusionMatrix::at(std::size_t true_idx, std::size_t pred_idx) const {
  return counts_[true_idx * labels_.size() + pred_idx];
}

std::int64_t& ConfusionMatrix::at(std::size_t true_idx, std::size_t pred_idx) {
  return counts_[true_idx * labels_.size() + pred_idx];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::int64_t ConfusionMatrix::support(std::size_t class_idx) const {
  std::int64_t n = 0;
  for (std::size_t j = 0; j < labels_.size(); ++j) n += at(class_idx, j);
  return n;
}

std::size_t ConfusionMatrix::index_of(const std::string& label) const {
  const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) {
    throw DataError("unknown label: " + label);
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

ConfusionMatrix confusion(const std::vector<PredictionRow>& rows) {
  validate_rows(rows);
  std::vector<std::string> labels;
  for (const auto& [name, score] : rows.front().scores) labels.push_back(name);
  ConfusionMatrix m(std::move(labels));
  for (const auto& row : rows) {
    ++m.at(m.index_of(row.true_class), m.index_of(row.predicted_class));
  }
  return m;
}

std::vector<double> per_class_recall(const ConfusionMatrix& m, bool allow_zero_support) {
  const std::size_t k = m.labels().size();
  std::vector<double> recalls(k, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < k; ++i) {
    const std::int64_t support = m.support(i);
    if (support == 0) {
      if (!allow_zero_support) {
        throw DataError("class " + m.labels()[i] + " has zero support");
      }
      continue;
    }
    recalls[i] = static_cast<double>(m.at(i, i)) / static_cast<double>(support);
  }
  return recalls;
}

double recall_macro(const ConfusionMatrix& m, bool allow_zero_support) {
  const auto recalls = per_class_recall(m, allow_zero_support);
  double sum = 0.0;
  std::size_t n = 0;
  for (double r : recalls) {
    if (!std::isnan(r)) {
      sum += r;
      ++n;
    }
  }
  if (n == 0) throw DataError("no class has support");
  return sum / static_cast<double>(n);
}

std::vector<double> per_class_f1(const ConfusionMatrix& m, bool allow_zero_support) {
  const std::size_t k = m.labels().size();
  std::vector<double> f1s(k, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < k; ++i) {
    const std::int64_t support = m.support(i);
    if (support == 0) {
      if (!allow_zero_support) {
        throw DataError("class " + m.labels()[i] + " has zero support");
      }
      continue;
    }
    const double tp = static_cast<double>(m.at(i, i));
    std::int64_t predicted = 0;
    for (std::size_t t = 0; t < k; ++t) predicted += m.at(t, i);
    const double precision = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    const double recall = tp / static_cast<double>(support);
    // A class never predicted correctly gets F1 = 0 by convention.
    f1s[i] = (precision + recall) > 0.0
                 ? 2.0 * precision * recall / (precision + recall)
                 : 0.0;
  }
  return f1s;
}

double f1_macro(const ConfusionMatrix& m, bool allow_zero_support) {
  const auto f1s = per_class_f1(m, allow_zero_support);
  double sum = 0.0;
  std::size_t n = 0;
  for (double f : f1s) {
    if (!std::isnan(f)) {
      sum += f;
      ++n;
    }
  }
  if (n == 0) throw DataError("no class has support");
  return sum / static_cast<double>(n);
}

double accuracy(const ConfusionMatrix& m) {
  const std::int64_t total = m.total();
  if (total == 0) throw DataError("empty confusion matrix");
  std::int64_t trace = 0;
  for (std::size_t i = 0; i < m.labels().size(); ++i) trace += m.at(i, i);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double auc_binary(const std::vector<PredictionRow>& rows, const std::string& positive_class) {
  validate_rows(rows);
  if (!rows.front().scores.count(positive_class)) {
    throw DataError("unknown label: " + positive_class);
  }
  struct Obs {
    double score;
    bool positive;
  };
  std::vector<Obs> obs;
  obs.reserve(rows.size());
  std::size_t n_pos = 0;
  for (const auto& row : rows) {
    const bool positive = row.true_class == positive_class;
    obs.push_back({row.scores.at(positive_class), positive});
    if (positive) ++n_pos;
  }
  const std::size_t n_neg = obs.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("auc for " + positive_class + ": both classes must be present");
  }

  std::sort(obs.begin(), obs.end(),
            [](const Obs& a, const Obs& b) { return a.score < b.score; });

  // Mann-Whitney via average ranks: tied groups share the mean of their
  // 1-based rank range, which is exactly half credit for tied pairs.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < obs.size()) {
    std::size_t j = i;
    while (j < obs.size() && obs[j].score == obs[i].score) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (obs[t].positive) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_ovr_macro(const std::vector<PredictionRow>& rows) {
  validate_rows(rows);
  std::set<std::string> truths;
  for (const auto& row : rows) truths.insert(row.true_class);
  if (truths.size() < 2) throw DataError("auc ovr: need at least two classes in truth");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [label, score] : rows.front().scores) {
    if (!truths.count(label)) {
      throw DataError("auc ovr: class " + label + " absent from truth labels");
    }
    sum += auc_binary(rows, label);
    ++n;
  }
  return sum / static_cast<double>(n);
}

MetricReport evaluate(const std::vector<PredictionRow>& rows, bool allow_zero_support) {
  const ConfusionMatrix m = confusion(rows);
  MetricReport report;
  report.labels = m.labels();
  report.accuracy = accuracy(m);
  report.macro_recall = recall_macro(m, allow_zero_support);
  report.macro_f1 = f1_macro(m, allow_zero_support);
  report.class_recall = per_class_recall(m, allow_zero_support);
  report.class_f1 = per_class_f1(m, allow_zero_support);

  report.class_auc.assign(report.labels.size(), std::numeric_limits<double>::quiet_NaN());
  std::set<std::string> truths;
  for (const auto& row : rows) truths.insert(row.true_class);
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    if (!truths.count(report.labels[i])) {
      if (!allow_zero_support) {
        throw DataError("auc ovr: class " + report.labels[i] + " absent from truth labels");
      }
      continue;
    }
    if (truths.size() < 2) {
      throw DataError("auc ovr: need at least two classes in truth");
    }
    report.class_auc[i] = auc_binary(rows, report.labels[i]);
    auc_sum += report.class_auc[i];
    ++auc_n;
  }
  report.macro_auc_ovr = auc_sum / static_cast<double>(auc_n);

  report.confusion.assign(report.labels.size(),
                          std::vector<std::int64_t>(report.labels.size(), 0));
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    for (std::size_t j = 0; j < report.labels.size(); ++j) {
      report.confusion[i][j] = m.at(i, j);
    }
  }
  return report;
}

void write_report_json(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["labels"] = report.labels;
  j["accuracy"] = report.accuracy;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["macro_auc_ovr"] = report.macro_auc_ovr;
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    nlohmann::json c;
    c["recall"] = report.class_recall[i];
    c["f1"] = report.class_f1[i];
    c["auc"] = report.class_auc[i];
    per_class[report.labels[i]] = std::move(c);
  }
  j["per_class"] = std::move(per_class);
  j["confusion"] = report.confusion;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path.string());
  out << j.dump(2) << "\n";
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream out;
  out << "class            recall       f1      auc\n";
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %8.4f %8.4f %8.4f\n",
                  report.labels[i].c_str(), report.class_recall[i], report.class_f1[i],
                  report.class_auc[i]);
    out << line;
  }
  char summary[160];
  std::snprintf(summary, sizeof(summary),
                "accuracy %.4f  macro recall %.4f  macro f1 %.4f  macro auc (ovr) %.4f\n",
                report.accuracy, report.macro_recall, report.macro_f1,
                report.macro_auc_ovr);
  out << summary;
  return out.str();
}

}  // namespace cossif
