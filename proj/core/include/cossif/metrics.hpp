#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cossif {

/// One classifier output row. The scores map carries one probability-like
/// value per class; predicted_class must equal the argmax of scores (ties
/// broken by class name ascending).
struct PredictionRow {
  std::string image_id;
  std::string true_class;
  std::string predicted_class;
  std::map<std::string, double> scores;
};

/// CSV with header image_id,true_class,predicted_class,score:<class>,...
/// Values must not contain commas. Validates the shared label universe and
/// the argmax invariant.
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  ConfusionMatrix(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const { return labels_; }
  std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const;
  std::int64_t& at(std::size_t true_idx, std::size_t pred_idx);
  std::int64_t total() const;
  std::int64_t support(std::size_t class_idx) const;  // row sum
  std::size_t index_of(const std::string& label) const;

 private:
  std::vector<std::string> labels_;  // sorted ascending
  std::vector<std::int64_t> counts_;
};

/// counts[true][pred] over the rows' shared label universe (the score-map
/// keys). Throws DataError on an empty input or a label outside the
/// universe.
ConfusionMatrix confusion(const std::vector<PredictionRow>& rows);

std::vector<double> per_class_recall(const ConfusionMatrix& m,
                                     bool allow_zero_support = false);
/// Mean of per-class recalls TP_i / (TP_i + FN_i). A zero-support class is
/// a DataError unless allow_zero_support, in which case it is excluded from
/// the mean.
double recall_macro(const ConfusionMatrix& m, bool allow_zero_support = false);

std::vector<double> per_class_f1(const ConfusionMatrix& m,
                                 bool allow_zero_support = false);
/// Mean of per-class 2PR/(P+R); a class with P + R == 0 contributes 0.
double f1_macro(const ConfusionMatrix& m, bool allow_zero_support = false);

/// trace / total.
double accuracy(const ConfusionMatrix& m);

/// Area under the ROC curve for `positive_class`, computed as the
/// Mann-Whitney rank statistic: tied scores share their average rank, which
/// credits tied positive/negative pairs 0.5. Throws DataError when only one
/// class is present.
double auc_binary(const std::vector<PredictionRow>& rows,
                  const std::string& positive_class);

/// One-vs-rest macro AUC: the mean of auc_binary over every universe class.
/// A class absent from the truth labels is a DataError.
double auc_ovr_macro(const std::vector<PredictionRow>& rows);

struct MetricReport {
  std::vector<std::string> labels;
  double accuracy = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_auc_ovr = 0.0;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
  std::vector<double> class_auc;
  std::vector<std::vector<std::int64_t>> confusion;
};

MetricReport evaluate(const std::vector<PredictionRow>& rows,
                      bool allow_zero_support = false);

void write_report_json(const MetricReport& report, const std::filesystem::path& path);
std::string format_report_table(const MetricReport& report);

}  // namespace cossif
