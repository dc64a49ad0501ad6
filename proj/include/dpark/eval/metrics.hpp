#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/eval/coco.hpp"
#include "dpark/eval/matching.hpp"

namespace dpark::eval {

/// One prediction or reference record. Labels are class names (or OBB kinds).
struct LabeledItem {
    std::string image_id;
    std::string label;
    Shape shape;
    double confidence = 1.0;
    std::optional<double> width_px;
};

/// Reads newline-delimited records {"image_id", "class", "bbox" | "obb" | "polygon", "confidence", "width_px"?}.
/// "class" may also be spelled "kind" for OBB predictions.
std::vector<LabeledItem> load_predictions(const std::string& path);
LabeledItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabeledItem& item);

enum class LabelSpace {
    classes,  ///< ParkingClass names
    obb_kinds ///< access_aisle -> "aisle", every other class -> "space"
};

std::vector<LabeledItem> truths_from_dataset(const Dataset& ds, LabelSpace space = LabelSpace::classes);

struct LabeledPair {
    std::string image_id;
    std::string pred_label;
    std::string truth_label;
    double iou = 0.0;
    std::optional<double> pred_width_px;
    std::optional<double> truth_width_px;
};

/// Matches of a whole dataset, accumulated image by image.
struct Evaluation {
    std::vector<LabeledPair> pairs;
    std::vector<std::string> false_positive_labels;
    std::vector<std::string> false_negative_labels;
};

/// Per-image Hungarian matching; items are grouped by image_id.
Evaluation evaluate(const std::vector<LabeledItem>& preds, const std::vector<LabeledItem>& truths, double iou_thresh,
                    IouMode mode = IouMode::envelope);

struct Counts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// Precision, recall and F1. A 0/0 ratio is reported as 0 with its flag set.
struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

Scores score(const Counts& c);
double f1_score(double precision, double recall);

struct ClassMetrics {
    std::map<std::string, Counts> per_class;
    std::map<std::string, Scores> per_class_scores;
    std::map<std::string, long> truth_count;
    Counts micro;
    Scores micro_scores;
};

/// A matched pair with differing labels counts as FP for the predicted label and FN for the true one.
ClassMetrics metrics(const Evaluation& ev);

inline constexpr const char* kNoneLabel = "none";

struct ConfusionMatrix {
    /// Row/column labels; the last entry is kNoneLabel.
    std::vector<std::string> labels;
    /// counts[truth][pred]; row "none" holds false positives, column "none" false negatives.
    std::vector<std::vector<long>> counts;
};

ConfusionMatrix confusion_matrix(const Evaluation& ev, std::vector<std::string> labels = {});

struct WidthSummary {
    std::size_t count = 0;
    std::size_t excluded_zero_reference = 0;
    double mean_px = 0.0;
    double sd_px = 0.0;
    double mean_pct = 0.0;
    double sd_pct = 0.0;
};

struct WidthSample {
    std::string label;
    double predicted_px = 0.0;
    double reference_px = 0.0;
};

/// Signed differences (prediction - reference); SD uses the n-1 denominator.
struct WidthStats {
    std::map<std::string, WidthSummary> per_class;
    WidthSummary total;
};

WidthStats width_compare(const std::vector<WidthSample>& samples);
/// Samples from matched pairs that carry both widths; labelled by the truth label.
std::vector<WidthSample> width_samples(const Evaluation& ev);

nlohmann::json to_json(const ClassMetrics& m);
nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const WidthStats& w);

/// Per-class precision/recall/F1 table with a micro-averaged Total row.
std::string detection_table(const ClassMetrics& m);
/// Class-agnostic TP / ground truth / recall / FN / FP summary.
std::string summary_table(const Evaluation& ev);
std::string confusion_table(const ConfusionMatrix& cm);
/// Mean difference and SD, in pixels and percent, per class and total.
std::string width_table(const WidthStats& w);

} // namespace dpark::eval
