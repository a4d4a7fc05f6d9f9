#include "partcom/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "partcom/errors.hpp"
#include "partcom/losses.hpp"
#include "partcom/ot.hpp"
#include "partcom/pufs.hpp"
#include "partcom/rng.hpp"

namespace partcom {

namespace {

// Tagged child-seed derivation, same shape as the generator's stream split.
std::uint64_t derive(std::uint64_t base, const char* tag, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(fnv1a64(tag) ^ mix64(base + 0x9E3779B97F4A7C15ULL * (a + 1)) +
                 0xBF58476D1CE4E5B9ULL * (b + 1));
}

std::string fmt_components(const EpochStats& st) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "ce=%.6g pl=%.6g pb=%.6g pd=%.6g pufs=%.6g total=%.6g",
                  st.ce, st.pl, st.pb, st.pd, st.pufs, st.total);
    return buf;
}

}  // namespace

Adam::Adam(std::vector<Tensor> params, double lr) : lr_(lr) {
    for (auto& p : params) {
        if (!p.requires_grad()) continue;
        slots_.push_back({p, std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0)});
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& slot : slots_) {
        auto node = slot.param.node();
        auto& value = node->value;
        auto& grad = node->grad;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
            slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
            value[i] -= lr_ * (slot.m[i] / bc1) / (std::sqrt(slot.v[i] / bc2) + eps_);
        }
        slot.param.zero_grad();
    }
}

namespace {

struct TrainItem {
    const PointCloud* cloud = nullptr;
    int label = 0;
    std::vector<std::vector<int>> nb;
};

}  // namespace

TrainOutput train_model(const ExperimentConfig& cfg_in, std::ostream* log) {
    ExperimentConfig cfg = cfg_in;
    cfg.task.seed = cfg.seed;
    cfg.validate();

    TaskData data = build_task(cfg.task);
    PartComModel model = PartComModel::init(cfg);

    std::vector<TrainItem> items;
    items.reserve(data.train.size());
    for (auto& s : data.train)
        items.push_back({&s.cloud, s.label, neighbor_lists(s.cloud, cfg.encoder.rho)});

    Adam opt(model.parameters(), cfg.lr);

    const bool proto = cfg.head == "proto";
    const bool parts = proto && cfg.part_head;
    const bool use_pb = parts && cfg.weights.lambda2 != 0.0;
    const bool use_pd = parts && cfg.weights.lambda3 != 0.0;
    const bool use_pufs = parts && cfg.pufs.enabled;
    const bool use_union = use_pufs && cfg.pufs.known_ce_union;
    const bool use_pl = proto && cfg.weights.lambda1 != 0.0;

    auto pb_targets = [&](const Tensor& z, int label) {
        AssignmentProblem prob;
        prob.rows = z.rows();
        prob.cols = static_cast<std::size_t>(cfg.m);
        prob.epsilon = cfg.ot_epsilon;
        prob.max_iters = cfg.ot_max_iters;
        prob.scores.assign(prob.rows * prob.cols, 0.0);
        const auto& zs = z.values();
        const auto& ps = model.bank.P.values();
        const std::size_t d = z.cols();
        const std::size_t base = static_cast<std::size_t>(label - 1) * prob.cols;
        for (std::size_t i = 0; i < prob.rows; ++i) {
            for (std::size_t j = 0; j < prob.cols; ++j) {
                double dot = 0.0;
                const double* zr = zs.data() + i * d;
                const double* pr = ps.data() + (base + j) * d;
                for (std::size_t t = 0; t < d; ++t) dot += zr[t] * pr[t];
                prob.scores[i * prob.cols + j] = dot;
            }
        }
        AssignmentMatrix plan = sinkhorn_assign(prob);
        return cfg.pb_rounding == "greedy" ? greedy_capacity_assign(plan) : hard_assign(plan);
    };

    // One batch: forward every sample, assemble the weighted objective in a
    // fixed order, optionally apply a gradient step. Returns the component
    // means actually seen by the optimizer.
    auto run_batch = [&](const std::vector<std::size_t>& ids, std::uint64_t pair_seed,
                         bool step) -> EpochStats {
        const double inv_n = 1.0 / static_cast<double>(ids.size());
        std::vector<ForwardOut> fo(ids.size());
        std::vector<int> labels(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const TrainItem& it = items[ids[i]];
            fo[i] = model.forward(*it.cloud, it.nb);
            labels[i] = it.label;
        }
        Tensor ce_sum, pl_sum, pb_sum;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Tensor ce_i;
            if (!proto) {
                ce_i = sub(row_logsumexp(fo[i].logits),
                           gather_cols(fo[i].logits, {labels[i] - 1}));
            } else if (use_union) {
                ce_i = loss_ce_known_union(fo[i].zc, model.c_protos, model.v_protos, labels[i]);
            } else {
                ce_i = loss_ce(fo[i].zc, model.c_protos, labels[i]);
            }
            ce_sum = i == 0 ? ce_i : add(ce_sum, ce_i);
            if (use_pl) {
                Tensor pl_i = loss_pl(fo[i].zc, model.c_protos, labels[i]);
                pl_sum = i == 0 ? pl_i : add(pl_sum, pl_i);
            }
            if (use_pb) {
                Tensor pb_i = loss_pb(fo[i].z, model.bank.class_slice(labels[i] - 1),
                                      pb_targets(fo[i].z, labels[i]), cfg.weights.tau);
                pb_sum = i == 0 ? pb_i : add(pb_sum, pb_i);
            }
        }
        Tensor ce = scale(ce_sum, inv_n);
        Tensor pl = use_pl ? scale(pl_sum, inv_n) : Tensor::scalar(0.0);
        Tensor pb = use_pb ? scale(pb_sum, inv_n) : Tensor::scalar(0.0);
        Tensor pd = use_pd ? loss_pd(model.bank.P, cfg.weights.delta) : Tensor::scalar(0.0);

        Tensor pufs_term = Tensor::scalar(0.0);
        if (use_pufs) {
            auto pairs = sample_pairs(labels, pair_seed, cfg.pufs);
            Tensor sum;
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const MixPair& mp = pairs[p];
                Tensor mixed = mixup_parts(fo[mp.i].zp, labels[mp.i], fo[mp.j].zp, labels[mp.j],
                                           mp.lambda, cfg.pufs);
                Tensor reducedv = cfg.fusion == "max" ? reduce_maxpool(model.reducer, mixed)
                                                      : reduce_concat(model.reducer, mixed);
                Tensor term = loss_ce_virtual(reducedv, model.c_protos, model.v_protos,
                                              labels[mp.i]);
                sum = p == 0 ? term : add(sum, term);
            }
            if (!pairs.empty()) pufs_term = scale(sum, 1.0 / static_cast<double>(pairs.size()));
        }

        Tensor total = proto ? total_loss(ce, pl, pb, pd, cfg.weights) : ce;
        if (use_pufs) total = add(total, scale(pufs_term, cfg.pufs.weight));

        EpochStats st{ce.item(), pl.item(), pb.item(), pd.item(), pufs_term.item(), total.item()};
        if (!std::isfinite(st.total))
            throw NumericalError("training diverged: non-finite batch loss (" +
                                 fmt_components(st) + ")");
        if (step) {
            backward(total);
            opt.step();
        }
        return st;
    };

    auto mean_over_batches = [](EpochStats& acc, const EpochStats& st, std::size_t n_batches) {
        acc.ce += st.ce / n_batches;
        acc.pl += st.pl / n_batches;
        acc.pb += st.pb / n_batches;
        acc.pd += st.pd / n_batches;
        acc.pufs += st.pufs / n_batches;
        acc.total += st.total / n_batches;
    };

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n_batches =
        (items.size() + static_cast<std::size_t>(cfg.batch) - 1) / cfg.batch;

    auto batch_ids = [&](std::size_t b) {
        std::size_t lo = b * cfg.batch;
        std::size_t hi = std::min(items.size(), lo + cfg.batch);
        return std::vector<std::size_t>(order.begin() + lo, order.begin() + hi);
    };

    TrainOutput out;
    EpochStats last_seen;
    {
        // Freshly generated data arrives class-sorted; measure the pre-step
        // loss on mixed batches like the ones training will see.
        Rng shuffler(derive(cfg.seed, "shuffle", 0));
        shuffler.shuffle(order);
    }
    for (std::size_t b = 0; b < n_batches; ++b) {
        EpochStats st = run_batch(batch_ids(b), derive(cfg.seed, "pufs-init", b), false);
        mean_over_batches(out.initial, st, n_batches);
    }
    last_seen = out.initial;
    if (log) *log << "epoch 0 (init)  " << fmt_components(out.initial) << "\n";

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffler(derive(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffler.shuffle(order);
        EpochStats acc;
        for (std::size_t b = 0; b < n_batches; ++b) {
            EpochStats st;
            try {
                st = run_batch(batch_ids(b), derive(cfg.seed, "pufs", epoch, b), true);
            } catch (const std::invalid_argument& e) {
                // Shapes were consistent on earlier batches, so a failed
                // operation here means activations went non-finite.
                throw NumericalError(std::string("training diverged: ") + e.what() +
                                     " (last good batch: " + fmt_components(last_seen) + ")");
            }
            last_seen = st;
            mean_over_batches(acc, st, n_batches);
        }
        if (parts) check_prototypes(model.bank);
        out.history.push_back(acc);
        if (log) *log << "epoch " << epoch << "  " << fmt_components(acc) << "\n";
    }

    out.checkpoint =
        snapshot(model, cfg.epochs, Rng(mix64(cfg.seed ^ fnv1a64("train-final"))).state());
    out.model = std::move(model);
    return out;
}

EvalOutput evaluate_model(const PartComModel& model, const std::vector<LabeledSample>& test) {
    const int k = model.cfg.k();
    const bool parts = model.cfg.head == "proto" && model.cfg.part_head;
    EvalOutput out;
    double entropy_sum = 0.0;
    for (const auto& sample : test) {
        if (sample.label < 1 || sample.label > k + 1)
            throw ConfigError("evaluate: sample label " + std::to_string(sample.label) +
                              " outside 1.." + std::to_string(k + 1));
        auto nb = neighbor_lists(sample.cloud, model.cfg.encoder.rho);
        ForwardOut f = model.forward(sample.cloud, nb);
        ScoreRecord r;
        r.true_label = sample.label;
        try {
            r.pred_label = model.predict(f);
            r.confidence = model.confidence(f);
        } catch (const std::invalid_argument&) {
            // Degenerate feature (e.g. every point of the shape landed in a
            // dead activation region). Record it as a maximally unconfident
            // rejection instead of aborting the whole evaluation: the model
            // pays for the failure in ACC and OSCR.
            r.pred_label = k + 1;
            r.confidence = -3.0;
        }
        out.records.push_back(r);
        (sample.label <= k ? out.n_known : out.n_unknown)++;

        if (parts && sample.label <= k) {
            // Histogram of hard point-to-prototype assignments within the
            // true class; its entropy measures how evenly the shape uses its
            // M prototypes.
            const std::size_t m = static_cast<std::size_t>(model.cfg.m);
            const std::size_t d = f.z.cols();
            AssignmentMatrix affinity;
            affinity.rows = f.z.rows();
            affinity.cols = m;
            affinity.converged = true;
            affinity.gamma.assign(affinity.rows * m, 0.0);
            const auto& zs = f.z.values();
            const auto& ps = model.bank.P.values();
            const std::size_t base = static_cast<std::size_t>(sample.label - 1) * m;
            for (std::size_t i = 0; i < affinity.rows; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    double dot = 0.0;
                    for (std::size_t t = 0; t < d; ++t)
                        dot += zs[i * d + t] * ps[(base + j) * d + t];
                    affinity.gamma[i * m + j] = dot;
                }
            std::vector<int> assign = hard_assign(affinity);
            std::vector<std::size_t> hist(m, 0);
            for (int a : assign) hist[static_cast<std::size_t>(a)]++;
            double h = 0.0;
            for (std::size_t count : hist) {
                if (count == 0) continue;
                const double p = static_cast<double>(count) / static_cast<double>(assign.size());
                h -= p * std::log(p);
            }
            entropy_sum += h;
            out.entropy_samples++;
        }
    }
    if (out.n_known > 0) out.acc = closed_set_accuracy(out.records, k);
    if (out.n_known > 0 && out.n_unknown > 0) {
        out.curve = oscr(out.records, k);
        out.oscr_valid = true;
    }
    if (out.entropy_samples > 0)
        out.mean_usage_entropy = entropy_sum / static_cast<double>(out.entropy_samples);
    return out;
}

void write_eval_outputs(const std::string& dir, const EvalOutput& out, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json metrics;
    metrics["acc"] = out.acc;
    metrics["oscr"] = out.oscr_valid ? nlohmann::json(out.curve.area) : nlohmann::json();
    metrics["n_known"] = out.n_known;
    metrics["n_unknown"] = out.n_unknown;
    metrics["seed"] = seed;
    {
        std::ofstream f(dir + "/metrics.json");
        if (!f) throw std::runtime_error("cannot open '" + dir + "/metrics.json' for writing");
        f << metrics.dump(2) << "\n";
    }
    write_records_csv(dir + "/records.csv", out.records);
    write_curve_csv(dir + "/curve.csv", out.oscr_valid ? out.curve : OscrCurve{});
    nlohmann::json diag;
    diag["mean_usage_entropy"] = out.mean_usage_entropy;
    diag["entropy_samples"] = out.entropy_samples;
    {
        std::ofstream f(dir + "/diagnostics.json");
        if (!f) throw std::runtime_error("cannot open '" + dir + "/diagnostics.json' for writing");
        f << diag.dump(2) << "\n";
    }
}

void write_task_dataset(const TaskData& data, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "clouds");
    auto dump_split = [&](const std::vector<LabeledSample>& samples, const char* split) {
        Manifest manifest;
        manifest.K = data.num_known;
        char name[64];
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::snprintf(name, sizeof name, "clouds/%s_%04zu.pc", split, i);
            write_cloud_file((fs::path(dir) / name).string(), samples[i].cloud);
            manifest.samples.push_back({name, samples[i].label, samples[i].domain});
        }
        write_manifest((fs::path(dir) / (std::string(split) + "_manifest.json")).string(),
                       manifest);
    };
    dump_split(data.train, "train");
    dump_split(data.test, "test");
}

SplitData load_split(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    Manifest manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    SplitData split;
    split.K = manifest.K;
    for (const auto& entry : manifest.samples) {
        fs::path p(entry.path);
        if (p.is_relative()) p = base / p;
        split.samples.push_back({read_cloud_file(p.string()), entry.label, entry.domain});
    }
    return split;
}

std::vector<AblationRow> ablation_rows() {
    std::vector<AblationRow> rows(7);
    rows[0].label = "baseline (global feature)";
    rows[1].label = "+part";
    rows[1].part = true;
    rows[2].label = "+part +pd";
    rows[2].part = rows[2].pd = true;
    rows[3].label = "+part +pb";
    rows[3].part = rows[3].pb = true;
    rows[4].label = "+part +pb +pd";
    rows[4].part = rows[4].pb = rows[4].pd = true;
    rows[5].label = "+part +pb +pd (max fusion)";
    rows[5].part = rows[5].pb = rows[5].pd = true;
    rows[5].fusion = "max";
    rows[6].label = "full (+unknown synthesis)";
    rows[6].part = rows[6].pb = rows[6].pd = rows[6].pufs = true;
    return rows;
}

ExperimentConfig apply_ablation_row(const ExperimentConfig& base, const AblationRow& row) {
    ExperimentConfig cfg = base;
    cfg.head = "proto";
    cfg.part_head = row.part;
    cfg.fusion = row.fusion;
    cfg.weights.lambda2 = row.pb ? base.weights.lambda2 : 0.0;
    cfg.weights.lambda3 = row.pd ? base.weights.lambda3 : 0.0;
    cfg.pufs.enabled = row.pufs;
    return cfg;
}

namespace {

void fill_stats(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    sd = 0.0;
    if (xs.size() > 1) {
        for (double x : xs) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
    }
}

}  // namespace

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, int n_seeds,
                                      std::ostream* log) {
    if (n_seeds < 1) throw ConfigError("ablation needs at least one seed");
    auto rows = ablation_rows();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int s = 0; s < n_seeds; ++s) {
            ExperimentConfig cfg = apply_ablation_row(base, rows[r]);
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            cfg.task.seed = cfg.seed;
            if (log)
                *log << "[ablate] row " << r + 1 << "/7 '" << rows[r].label << "' seed "
                     << cfg.seed << "\n";
            TrainOutput trained = train_model(cfg);
            TaskData data = build_task(cfg.task);
            EvalOutput ev = evaluate_model(trained.model, data.test);
            rows[r].accs.push_back(ev.acc);
            rows[r].oscrs.push_back(ev.oscr_valid ? ev.curve.area : 0.0);
            rows[r].entropies.push_back(ev.mean_usage_entropy);
        }
        fill_stats(rows[r].accs, rows[r].acc_mean, rows[r].acc_std);
        fill_stats(rows[r].oscrs, rows[r].oscr_mean, rows[r].oscr_std);
        double unused_sd = 0.0;
        fill_stats(rows[r].entropies, rows[r].entropy_mean, unused_sd);
        if (log) *log << format_ablation_table({rows[r]});
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::string out;
    char line[160];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof line, "%-30s  acc %.4f +- %.4f   oscr %.4f +- %.4f\n",
                      row.label.c_str(), row.acc_mean, row.acc_std, row.oscr_mean, row.oscr_std);
        out += line;
    }
    return out;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "row,label,part,l_pd,l_pb,fusion,pufs,acc_mean,acc_std,oscr_mean,oscr_std,entropy_mean\n";
    char buf[360];
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::snprintf(buf, sizeof buf, "%zu,%s,%d,%d,%d,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r + 1, row.label.c_str(), row.part ? 1 : 0, row.pd ? 1 : 0, row.pb ? 1 : 0,
                      row.fusion.c_str(), row.pufs ? 1 : 0, row.acc_mean, row.acc_std,
                      row.oscr_mean, row.oscr_std, row.entropy_mean);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace partcom
