#include "dpark/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "dpark/detector_json.hpp"

namespace dpark::eval {

namespace {

double ratio(long num, long den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void accumulate(WidthSummary& s, const std::vector<double>& px, const std::vector<double>& pct) {
    s.count = px.size();
    if (px.empty()) return;
    const auto mean = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(v.size());
    };
    const auto sd = [](const std::vector<double>& v, double m) {
        if (v.size() < 2) return 0.0;
        double acc = 0.0;
        for (double x : v) acc += (x - m) * (x - m);
        return std::sqrt(acc / static_cast<double>(v.size() - 1));
    };
    s.mean_px = mean(px);
    s.sd_px = sd(px, s.mean_px);
    s.mean_pct = mean(pct);
    s.sd_pct = sd(pct, s.mean_pct);
}

std::string image_id_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ParseError("image_id must be an integer or string");
}

} // namespace

LabeledItem item_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("prediction record must be an object");
    LabeledItem item;
    if (!j.contains("image_id")) throw ParseError("prediction record lacks image_id");
    item.image_id = image_id_text(j.at("image_id"));
    const char* label_key = j.contains("class") ? "class" : "kind";
    if (!j.contains(label_key) || !j.at(label_key).is_string()) throw ParseError("prediction record lacks class");
    item.label = j.at(label_key).get<std::string>();
    if (j.contains("bbox")) {
        const auto& b = j.at("bbox");
        if (!b.is_array() || b.size() != 4) throw ParseError("bbox must be [x, y, w, h]");
        item.shape = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    } else if (j.contains("obb")) {
        item.shape = obb_from_json(j.at("obb"));
    } else if (j.contains("polygon")) {
        Polygon poly;
        for (const auto& p : j.at("polygon")) {
            if (!p.is_array() || p.size() != 2) throw ParseError("polygon vertex must be [x, y]");
            poly.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        if (poly.size() < 3) throw ParseError("polygon needs at least 3 vertices");
        item.shape = std::move(poly);
    } else {
        throw ParseError("prediction record needs bbox, obb or polygon");
    }
    item.confidence = j.value("confidence", 1.0);
    if (j.contains("width_px") && !j.at("width_px").is_null()) item.width_px = j.at("width_px").get<double>();
    return item;
}

nlohmann::json to_json(const LabeledItem& item) {
    nlohmann::json j = {{"image_id", item.image_id}, {"class", item.label}, {"confidence", item.confidence}};
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Box>) j["bbox"] = {g.x, g.y, g.w, g.h};
            else if constexpr (std::is_same_v<T, OrientedBox>) j["obb"] = to_json(g);
            else {
                auto& poly = j["polygon"] = nlohmann::json::array();
                for (const auto& p : g) poly.push_back({p.x, p.y});
            }
        },
        item.shape);
    if (item.width_px) j["width_px"] = *item.width_px;
    return j;
}

std::vector<LabeledItem> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<LabeledItem> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(item_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path, lineno, e.what()));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("{}:{}: {}", path, lineno, e.what()));
        }
    }
    return out;
}

std::vector<LabeledItem> truths_from_dataset(const Dataset& ds, LabelSpace space) {
    std::vector<LabeledItem> out;
    out.reserve(ds.objects.size());
    for (const auto& o : ds.objects) {
        LabeledItem item;
        item.image_id = o.image_id;
        if (space == LabelSpace::classes) item.label = std::string(to_string(o.cls));
        else item.label = o.cls == ParkingClass::access_aisle ? "aisle" : "space";
        item.shape = o.polygon;
        out.push_back(std::move(item));
    }
    return out;
}

Evaluation evaluate(const std::vector<LabeledItem>& preds, const std::vector<LabeledItem>& truths, double iou_thresh,
                    IouMode mode) {
    std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> by_image;
    for (int i = 0; i < static_cast<int>(preds.size()); ++i) by_image[preds[i].image_id].first.push_back(i);
    for (int j = 0; j < static_cast<int>(truths.size()); ++j) by_image[truths[j].image_id].second.push_back(j);

    Evaluation ev;
    for (const auto& [image_id, idx] : by_image) {
        std::vector<Shape> ps, ts;
        for (int i : idx.first) ps.push_back(preds[i].shape);
        for (int j : idx.second) ts.push_back(truths[j].shape);
        const auto m = match_detections(ps, ts, iou_thresh, mode);
        for (const auto& pair : m.pairs) {
            const auto& p = preds[idx.first[pair.pred]];
            const auto& t = truths[idx.second[pair.truth]];
            ev.pairs.push_back({image_id, p.label, t.label, pair.iou, p.width_px, t.width_px});
        }
        for (int i : m.unmatched_preds) ev.false_positive_labels.push_back(preds[idx.first[i]].label);
        for (int j : m.unmatched_truths) ev.false_negative_labels.push_back(truths[idx.second[j]].label);
    }
    return ev;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Scores score(const Counts& c) {
    Scores s;
    s.precision = ratio(c.tp, c.tp + c.fp, s.precision_undefined);
    s.recall = ratio(c.tp, c.tp + c.fn, s.recall_undefined);
    s.f1_undefined = s.precision + s.recall == 0.0;
    s.f1 = f1_score(s.precision, s.recall);
    return s;
}

ClassMetrics metrics(const Evaluation& ev) {
    ClassMetrics m;
    for (const auto& p : ev.pairs) {
        ++m.truth_count[p.truth_label];
        if (p.pred_label == p.truth_label) {
            ++m.per_class[p.truth_label].tp;
        } else {
            ++m.per_class[p.pred_label].fp;
            ++m.per_class[p.truth_label].fn;
        }
    }
    for (const auto& l : ev.false_positive_labels) ++m.per_class[l].fp;
    for (const auto& l : ev.false_negative_labels) {
        ++m.per_class[l].fn;
        ++m.truth_count[l];
    }
    for (const auto& [label, c] : m.per_class) {
        m.truth_count.try_emplace(label, 0);
        m.per_class_scores[label] = score(c);
        m.micro.tp += c.tp;
        m.micro.fp += c.fp;
        m.micro.fn += c.fn;
    }
    m.micro_scores = score(m.micro);
    return m;
}

ConfusionMatrix confusion_matrix(const Evaluation& ev, std::vector<std::string> labels) {
    if (labels.empty()) {
        std::set<std::string> seen;
        for (const auto& p : ev.pairs) {
            seen.insert(p.pred_label);
            seen.insert(p.truth_label);
        }
        seen.insert(ev.false_positive_labels.begin(), ev.false_positive_labels.end());
        seen.insert(ev.false_negative_labels.begin(), ev.false_negative_labels.end());
        labels.assign(seen.begin(), seen.end());
    }
    labels.push_back(kNoneLabel);
    const auto index = [&](const std::string& l) {
        const auto it = std::find(labels.begin(), labels.end() - 1, l);
        if (it == labels.end() - 1) throw InvalidArgument("label '" + l + "' missing from confusion labels");
        return static_cast<std::size_t>(it - labels.begin());
    };
    ConfusionMatrix cm;
    cm.counts.assign(labels.size(), std::vector<long>(labels.size(), 0));
    const auto none = labels.size() - 1;
    for (const auto& p : ev.pairs) ++cm.counts[index(p.truth_label)][index(p.pred_label)];
    for (const auto& l : ev.false_positive_labels) ++cm.counts[none][index(l)];
    for (const auto& l : ev.false_negative_labels) ++cm.counts[index(l)][none];
    cm.labels = std::move(labels);
    return cm;
}

std::vector<WidthSample> width_samples(const Evaluation& ev) {
    std::vector<WidthSample> out;
    for (const auto& p : ev.pairs)
        if (p.pred_width_px && p.truth_width_px) out.push_back({p.truth_label, *p.pred_width_px, *p.truth_width_px});
    return out;
}

WidthStats width_compare(const std::vector<WidthSample>& samples) {
    struct Acc {
        std::vector<double> px, pct;
        std::size_t excluded = 0;
    };
    std::map<std::string, Acc> by_class;
    Acc total;
    for (const auto& s : samples) {
        auto& acc = by_class[s.label];
        if (s.reference_px == 0.0) {
            ++acc.excluded;
            ++total.excluded;
            continue;
        }
        const double d = s.predicted_px - s.reference_px;
        const double pct = d / s.reference_px * 100.0;
        acc.px.push_back(d);
        acc.pct.push_back(pct);
        total.px.push_back(d);
        total.pct.push_back(pct);
    }
    WidthStats stats;
    for (auto& [label, acc] : by_class) {
        auto& s = stats.per_class[label];
        accumulate(s, acc.px, acc.pct);
        s.excluded_zero_reference = acc.excluded;
    }
    accumulate(stats.total, total.px, total.pct);
    stats.total.excluded_zero_reference = total.excluded;
    return stats;
}

namespace {

nlohmann::json counts_json(const Counts& c, const Scores& s) {
    return {{"tp", c.tp},
            {"fp", c.fp},
            {"fn", c.fn},
            {"precision", s.precision},
            {"recall", s.recall},
            {"f1", s.f1},
            {"precision_undefined", s.precision_undefined},
            {"recall_undefined", s.recall_undefined},
            {"f1_undefined", s.f1_undefined}};
}

nlohmann::json width_json(const WidthSummary& s) {
    return {{"count", s.count},          {"excluded_zero_reference", s.excluded_zero_reference},
            {"mean_px", s.mean_px},      {"sd_px", s.sd_px},
            {"mean_pct", s.mean_pct},    {"sd_pct", s.sd_pct}};
}

} // namespace

nlohmann::json to_json(const ClassMetrics& m) {
    nlohmann::json j = {{"per_class", nlohmann::json::object()}, {"micro", counts_json(m.micro, m.micro_scores)}};
    for (const auto& [label, c] : m.per_class) {
        auto entry = counts_json(c, m.per_class_scores.at(label));
        entry["truth_count"] = m.truth_count.at(label);
        j["per_class"][label] = std::move(entry);
    }
    return j;
}

nlohmann::json to_json(const ConfusionMatrix& cm) { return {{"labels", cm.labels}, {"counts", cm.counts}}; }

nlohmann::json to_json(const WidthStats& w) {
    nlohmann::json j = {{"per_class", nlohmann::json::object()}, {"total", width_json(w.total)}};
    for (const auto& [label, s] : w.per_class) j["per_class"][label] = width_json(s);
    return j;
}

std::string detection_table(const ClassMetrics& m) {
    std::string out = fmt::format("{:<16} {:>7} {:>9} {:>7} {:>6}\n", "Class", "Count", "Precision", "Recall", "F1");
    for (const auto& [label, c] : m.per_class) {
        const auto& s = m.per_class_scores.at(label);
        out += fmt::format("{:<16} {:>7} {:>9.2f} {:>7.2f} {:>6.2f}\n", label, m.truth_count.at(label), s.precision,
                           s.recall, s.f1);
    }
    long total = 0;
    for (const auto& [_, n] : m.truth_count) total += n;
    out += fmt::format("{:<16} {:>7} {:>9.2f} {:>7.2f} {:>6.2f}\n", "Total", total, m.micro_scores.precision,
                       m.micro_scores.recall, m.micro_scores.f1);
    return out;
}

std::string summary_table(const Evaluation& ev) {
    const long tp = static_cast<long>(ev.pairs.size());
    const long fn = static_cast<long>(ev.false_negative_labels.size());
    const long fp = static_cast<long>(ev.false_positive_labels.size());
    const long gt = tp + fn;
    const double recall = gt ? 100.0 * tp / gt : 0.0;
    std::string out = fmt::format("{:>6} {:>6} {:>10} {:>6} {:>6}\n", "TP", "GT", "Recall(%)", "FN", "FP");
    out += fmt::format("{:>6} {:>6} {:>10.1f} {:>6} {:>6}\n", tp, gt, recall, fn, fp);
    return out;
}

std::string confusion_table(const ConfusionMatrix& cm) {
    std::string out = fmt::format("{:<16}", "truth \\ pred");
    for (const auto& l : cm.labels) out += fmt::format(" {:>12}", l);
    out += '\n';
    for (std::size_t r = 0; r < cm.labels.size(); ++r) {
        out += fmt::format("{:<16}", cm.labels[r]);
        for (long v : cm.counts[r]) out += fmt::format(" {:>12}", v);
        out += '\n';
    }
    return out;
}

std::string width_table(const WidthStats& w) {
    std::string out = fmt::format("{:<16} {:>5} {:>10} {:>8} {:>8} {:>8}\n", "Class", "Cnt", "Mean(px)", "Mean(%)",
                                  "SD(px)", "SD(%)");
    const auto row = [&](const std::string& label, const WidthSummary& s) {
        if (s.count == 0) return fmt::format("{:<16} {:>5} {:>10} {:>8} {:>8} {:>8}\n", label, 0, "n/a", "n/a", "n/a", "n/a");
        return fmt::format("{:<16} {:>5} {:>10.2f} {:>8.2f} {:>8.2f} {:>8.2f}\n", label, s.count, s.mean_px,
                           s.mean_pct, s.sd_px, s.sd_pct);
    };
    for (const auto& [label, s] : w.per_class) out += row(label, s);
    out += row("Total", w.total);
    return out;
}

} // namespace dpark::eval
