#include "partcom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "partcom/errors.hpp"

namespace partcom {

namespace {

// Argmax over the single row of a 1 x n similarity tensor, ties -> lowest.
std::size_t best_column(const Tensor& sims) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < sims.cols(); ++j) {
        if (sims(0, j) > sims(0, best)) best = j;
    }
    return best;
}

}  // namespace

int predict_open(const Tensor& feature, const Tensor& class_protos,
                 const Tensor& virtual_protos) {
    Tensor stacked = concat_rows({class_protos, virtual_protos});
    Tensor sims = cosine_rows(feature, stacked);
    std::size_t best = best_column(sims);
    std::size_t k = class_protos.rows();
    return best < k ? static_cast<int>(best) + 1 : static_cast<int>(k) + 1;
}

int predict_closed(const Tensor& feature, const Tensor& class_protos) {
    Tensor sims = cosine_rows(feature, class_protos);
    return static_cast<int>(best_column(sims)) + 1;
}

double margin_confidence(const Tensor& feature, const Tensor& class_protos,
                         const Tensor& virtual_protos) {
    Tensor known = cosine_rows(feature, class_protos);
    Tensor virt = cosine_rows(feature, virtual_protos);
    return known(0, best_column(known)) - virt(0, best_column(virt));
}

double softmax_confidence(const Tensor& logits) {
    if (logits.rows() != 1 || logits.cols() == 0)
        throw std::invalid_argument("softmax_confidence: need a 1 x n logits row, got " +
                                    shape_str(logits));
    double best = logits(0, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j) best = std::max(best, logits(0, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) denom += std::exp(logits(0, j) - best);
    return 1.0 / denom;
}

OscrCurve oscr(const std::vector<ScoreRecord>& records, int num_known_classes) {
    if (num_known_classes <= 0) throw std::invalid_argument("oscr: need a positive class count");
    std::size_t n_known = 0, n_unknown = 0;
    for (const auto& r : records) {
        if (!std::isfinite(r.confidence)) throw std::invalid_argument("oscr: non-finite confidence");
        (r.true_label <= num_known_classes ? n_known : n_unknown)++;
    }
    if (n_known == 0) throw std::invalid_argument("oscr: no known-class samples");
    if (n_unknown == 0) throw std::invalid_argument("oscr: no unknown samples");

    std::vector<ScoreRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.confidence > b.confidence; });

    // Walk the distinct confidence levels from the top. Lowering the
    // threshold onto a level admits its knowns (>=) while its unknowns still
    // fail the strict comparison, so each level is a vertical step (ccr up)
    // followed by a horizontal one (fpr right); only the horizontal moves
    // sweep out area, at the already-updated ccr.
    OscrCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    std::size_t correct = 0, false_pos = 0;
    double area = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t add_correct = 0, add_false = 0;
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].confidence == sorted[i].confidence) {
            const ScoreRecord& r = sorted[j];
            if (r.true_label <= num_known_classes) {
                if (r.pred_label == r.true_label) ++add_correct;
            } else {
                ++add_false;
            }
            ++j;
        }
        if (add_correct > 0) {
            correct += add_correct;
            curve.points.emplace_back(double(false_pos) / double(n_unknown),
                                      double(correct) / double(n_known));
        }
        if (add_false > 0) {
            double fpr_before = double(false_pos) / double(n_unknown);
            false_pos += add_false;
            double fpr_after = double(false_pos) / double(n_unknown);
            double ccr = double(correct) / double(n_known);
            area += (fpr_after - fpr_before) * ccr;
            curve.points.emplace_back(fpr_after, ccr);
        }
        i = j;
    }
    if (curve.points.back().first != 1.0) {
        curve.points.emplace_back(1.0, double(correct) / double(n_known));
    }
    curve.area = area;
    return curve;
}

double closed_set_accuracy(const std::vector<ScoreRecord>& records, int num_known_classes) {
    std::size_t n_known = 0, hits = 0;
    for (const auto& r : records) {
        if (r.true_label > num_known_classes) continue;
        ++n_known;
        if (r.pred_label == r.true_label) ++hits;
    }
    if (n_known == 0) throw std::invalid_argument("closed_set_accuracy: no known-class samples");
    return double(hits) / double(n_known);
}

void write_records_csv(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "true_label,pred_label,confidence\n";
    char buf[96];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", r.true_label, r.pred_label, r.confidence);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<ScoreRecord> read_records_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || line != "true_label,pred_label,confidence") {
        throw ParseError(path + ": bad header (line 1)");
    }
    std::vector<ScoreRecord> records;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) throw ParseError(path + ": empty line (line " + std::to_string(line_no) + ")");
        const char* s = line.c_str();
        char* end = nullptr;
        ScoreRecord r;
        long t = std::strtol(s, &end, 10);
        if (end == s || *end != ',') {
            throw ParseError(path + ": malformed record (line " + std::to_string(line_no) + ")");
        }
        s = end + 1;
        long p = std::strtol(s, &end, 10);
        if (end == s || *end != ',') {
            throw ParseError(path + ": malformed record (line " + std::to_string(line_no) + ")");
        }
        s = end + 1;
        r.confidence = std::strtod(s, &end);
        if (end == s) {
            throw ParseError(path + ": malformed record (line " + std::to_string(line_no) + ")");
        }
        while (*end == ' ' || *end == '\r') ++end;
        if (*end != '\0') {
            throw ParseError(path + ": trailing data (line " + std::to_string(line_no) + ")");
        }
        r.true_label = static_cast<int>(t);
        r.pred_label = static_cast<int>(p);
        records.push_back(r);
    }
    return records;
}

void write_curve_csv(const std::string& path, const OscrCurve& curve) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "fpr,ccr\n";
    char buf[96];
    for (const auto& [fpr, ccr] : curve.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", fpr, ccr);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace partcom
