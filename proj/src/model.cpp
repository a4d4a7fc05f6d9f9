#include "partcom/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "partcom/errors.hpp"
#include "partcom/losses.hpp"
#include "partcom/metrics.hpp"
#include "partcom/rng.hpp"

namespace partcom {

namespace {

Tensor mean_pool_rows(const Tensor& z) {
    Tensor ones = Tensor::full(1, z.rows(), 1.0 / static_cast<double>(z.rows()));
    return matmul(ones, z);
}

}  // namespace

PartComModel PartComModel::init(const ExperimentConfig& cfg) {
    cfg.validate();
    PartComModel model;
    model.cfg = cfg;
    model.encoder = Encoder::init(cfg.encoder, cfg.seed);
    const int k = cfg.k();
    if (cfg.head == "softmax") {
        Rng rng(mix64(cfg.seed ^ fnv1a64("cls-head")));
        model.w_cls = init_weight(cfg.encoder.d, static_cast<std::size_t>(k), rng);
        model.b_cls = init_bias(cfg.encoder.d, static_cast<std::size_t>(k), rng);
        return model;
    }
    if (cfg.part_head) {
        model.bank = PartBank::init(k, cfg.m, cfg.encoder.d, cfg.seed);
        model.reducer = Reducer::init(cfg.encoder.d, cfg.d_r, cfg.seed);
    } else {
        // Mean-pooled rectified features live in the nonnegative orthant;
        // without a trainable projection after the pool, the prototype
        // losses have nothing to reshape the feature space with and the
        // head degrades badly at longer training runs.
        Rng rng(mix64(cfg.seed ^ fnv1a64("pool-head")));
        model.w_pool = init_weight(cfg.encoder.d, cfg.encoder.d, rng);
        model.b_pool = init_bias(cfg.encoder.d, cfg.encoder.d, rng);
    }
    const std::size_t dc = cfg.feature_width();
    model.c_protos = init_prototype_rows(k, dc, cfg.seed, "class-protos");
    model.v_protos = init_prototype_rows(k, dc, cfg.seed, "virtual-protos");
    return model;
}

std::vector<std::pair<std::string, Tensor>> PartComModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out = {
        {"enc.w1", encoder.w1}, {"enc.b1", encoder.b1}, {"enc.w2", encoder.w2},
        {"enc.b2", encoder.b2}, {"enc.w3", encoder.w3}, {"enc.b3", encoder.b3},
        {"enc.wc", encoder.wc}, {"enc.bc", encoder.bc},
    };
    if (cfg.head == "softmax") {
        out.emplace_back("cls.w", w_cls);
        out.emplace_back("cls.b", b_cls);
        return out;
    }
    if (cfg.part_head) {
        out.emplace_back("parts.p", bank.P);
        out.emplace_back("red.w", reducer.W);
        out.emplace_back("red.b", reducer.b);
    } else {
        out.emplace_back("pool.w", w_pool);
        out.emplace_back("pool.b", b_pool);
    }
    out.emplace_back("proto.c", c_protos);
    out.emplace_back("proto.v", v_protos);
    return out;
}

std::vector<Tensor> PartComModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

ForwardOut PartComModel::forward(const PointCloud& x,
                                 const std::vector<std::vector<int>>& neighbors) const {
    ForwardOut f;
    f.z = encoder.encode(x, neighbors);
    if (cfg.head == "softmax") {
        f.zc = mean_pool_rows(f.z);
        f.logits = add(matmul(f.zc, w_cls), b_cls);
        return f;
    }
    if (!cfg.part_head) {
        f.zc = add(matmul(mean_pool_rows(f.z), w_pool), b_pool);
        return f;
    }
    f.s = similarity_map(bank, f.z);
    f.zp = aggregate(f.s, f.z);
    f.zc = cfg.fusion == "max" ? reduce_maxpool(reducer, f.zp) : reduce_concat(reducer, f.zp);
    return f;
}

int PartComModel::predict(const ForwardOut& f) const {
    if (cfg.head == "softmax") {
        std::size_t best = 0;
        for (std::size_t j = 1; j < f.logits.cols(); ++j)
            if (f.logits(0, j) > f.logits(0, best)) best = j;
        return static_cast<int>(best) + 1;
    }
    return predict_closed(f.zc, c_protos);
}

double PartComModel::confidence(const ForwardOut& f) const {
    if (cfg.head == "softmax") return softmax_confidence(f.logits);
    // Max posterior of the temperature-sharpened cosine softmax over the
    // known-class prototypes, for every prototype head. The virtual-unknown
    // bank deliberately stays out of this scalar: synthesis training parks
    // each V row a hair's breadth from its C row, so a best-C-minus-best-V
    // margin is numerical noise that ranks knowns against unknowns worse
    // than the class posterior itself. V still shapes the feature space
    // through its loss term and still takes part in open-set prediction.
    Tensor sims = scale(cosine_rows(f.zc, c_protos), 1.0 / cfg.weights.tau);
    return softmax_confidence(sims);
}

Checkpoint snapshot(const PartComModel& model, int epoch, const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.config_text = canonical_config_text(model.cfg);
    ckpt.config_hash = config_hash(model.cfg);
    ckpt.epoch = epoch;
    ckpt.rng_state = rng_state;
    for (auto& [name, t] : model.named_parameters()) {
        ckpt.params.emplace_back(name, Tensor::from_data(t.rows(), t.cols(), t.values()));
    }
    return ckpt;
}

namespace {

constexpr char kMagic[8] = {'P', 'C', 'K', 'P', 'T', '1', '\n', '\0'};

void put_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ofstream& f, const std::string& s) {
    put_u64(f, s.size());
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::ifstream& f, const std::string& path) {
    std::uint64_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw ParseError(path + ": truncated checkpoint");
    return v;
}

std::string get_str(std::ifstream& f, const std::string& path) {
    std::uint64_t n = get_u64(f, path);
    if (n > (1ULL << 30)) throw ParseError(path + ": implausible string length");
    std::string s(n, '\0');
    if (!f.read(s.data(), static_cast<std::streamsize>(n)))
        throw ParseError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(kMagic, sizeof kMagic);
    put_u64(f, ckpt.config_hash);
    put_u64(f, static_cast<std::uint64_t>(ckpt.epoch));
    put_str(f, ckpt.config_text);
    put_str(f, ckpt.rng_state);
    put_u64(f, ckpt.params.size());
    for (auto& [name, t] : ckpt.params) {
        put_str(f, name);
        put_u64(f, t.rows());
        put_u64(f, t.cols());
        f.write(reinterpret_cast<const char*>(t.values().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + path + "'");
    char magic[sizeof kMagic];
    if (!f.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError(path + ": not a checkpoint file");
    Checkpoint ckpt;
    ckpt.config_hash = get_u64(f, path);
    ckpt.epoch = static_cast<int>(get_u64(f, path));
    ckpt.config_text = get_str(f, path);
    ckpt.rng_state = get_str(f, path);
    std::uint64_t n = get_u64(f, path);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = get_str(f, path);
        std::uint64_t rows = get_u64(f, path);
        std::uint64_t cols = get_u64(f, path);
        if (rows * cols > (1ULL << 28)) throw ParseError(path + ": implausible tensor size");
        std::vector<double> data(rows * cols);
        if (!f.read(reinterpret_cast<char*>(data.data()),
                    static_cast<std::streamsize>(data.size() * sizeof(double))))
            throw ParseError(path + ": truncated checkpoint");
        ckpt.params.emplace_back(name, Tensor::from_data(rows, cols, std::move(data)));
    }
    return ckpt;
}

PartComModel restore_model(const Checkpoint& ckpt) {
    ExperimentConfig cfg = parse_config_text(ckpt.config_text);
    PartComModel model = PartComModel::init(cfg);
    auto named = model.named_parameters();
    if (named.size() != ckpt.params.size())
        throw ParseError("checkpoint does not match its config: parameter count differs");
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto& [name, t] = named[i];
        auto& [ck_name, ck_t] = ckpt.params[i];
        if (name != ck_name || t.rows() != ck_t.rows() || t.cols() != ck_t.cols())
            throw ParseError("checkpoint does not match its config: parameter '" + ck_name + "'");
        t.values() = ck_t.values();
    }
    return model;
}

}  // namespace partcom
