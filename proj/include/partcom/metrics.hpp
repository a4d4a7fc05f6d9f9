#pragma once

#include <string>
#include <utility>
#include <vector>

#include "partcom/tensor.hpp"

namespace partcom {

// One evaluated sample. Labels are 1-based; known classes are 1..K and the
// unknown bucket is K+1. pred_label holds the closed-set prediction (argmax
// over the K class prototypes only) — the open/unknown decision is carried by
// the confidence score, not by this field.
struct ScoreRecord {
    int true_label = 0;
    int pred_label = 0;
    double confidence = 0.0;
};

// Correct-classification-rate vs false-positive-rate curve traced by sweeping
// a rejection threshold from +inf down to -inf, plus the area under it.
// points runs from (0, 0) to (1, closed-set accuracy) with fpr non-decreasing.
struct OscrCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, ccr)
    double area = 0.0;
};

// Open-set decision: most similar row among the class prototypes stacked on
// top of the virtual ones (cosine). Rows 0..K-1 map to labels 1..K, any
// virtual row maps to K+1. Ties break toward the lower row index, so a class
// row wins an exact tie with a virtual row.
int predict_open(const Tensor& feature, const Tensor& class_protos,
                 const Tensor& virtual_protos);

// Closed-set argmax over the class prototypes only -> 1..K.
int predict_closed(const Tensor& feature, const Tensor& class_protos);

// max_k cos(feature, C_k) - max_k cos(feature, V_k). Non-negative exactly
// when predict_open lands on a class row.
double margin_confidence(const Tensor& feature, const Tensor& class_protos,
                         const Tensor& virtual_protos);

// Max softmax probability of a 1 x n logits row, in [1/n, 1]. The confidence
// score of the plain-softmax and prototype-without-virtuals heads.
double softmax_confidence(const Tensor& logits);

// Threshold sweep over the recorded confidences. At threshold theta a known
// sample counts as accepted when its confidence >= theta, an unknown when its
// confidence > theta; the asymmetry means samples rejected "at" a tied score
// keep their known hits first, which makes the curve a staircase whose area
// is invariant under any strictly increasing rescaling of the confidences.
// Throws std::invalid_argument when either side of the split is empty or a
// confidence is not finite.
OscrCurve oscr(const std::vector<ScoreRecord>& records, int num_known_classes);

// Fraction of known-class samples whose closed-set prediction is right.
double closed_set_accuracy(const std::vector<ScoreRecord>& records, int num_known_classes);

// CSV with header "true_label,pred_label,confidence"; doubles round-trip
// exactly (%.17g).
void write_records_csv(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_records_csv(const std::string& path);

// CSV with header "fpr,ccr", one curve point per line.
void write_curve_csv(const std::string& path, const OscrCurve& curve);

}  // namespace partcom
