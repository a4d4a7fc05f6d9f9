#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "partcom/backbone.hpp"
#include "partcom/config.hpp"
#include "partcom/errors.hpp"
#include "partcom/model.hpp"
#include "partcom/rng.hpp"

using namespace partcom;

namespace {

// Small but valid config used as the base for most cases here.
std::string small_config_text() {
    return "task.known = mug, chair\n"
           "task.unknown = lamp\n"
           "task.train_per_class = 2\n"
           "task.test_per_class = 1\n"
           "task.points = 64\n"
           "encoder.h1 = 8\n"
           "encoder.h2 = 8\n"
           "encoder.d = 8\n"
           "model.m = 2\n"
           "model.d_r = 4\n"
           "opt.epochs = 1\n"
           "opt.batch = 2\n"
           "seed = 11\n";
}

PointCloud random_cloud(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.pts.push_back({rng.uniform() * 2 - 1, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1});
    normalize_cloud(c);  // the encoder insists on centered unit-scale input
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, later keys win") {
    auto cfg = parse_config_text("# comment line\n"
                                 "\n"
                                 "task.known = mug,chair,lamp  # trailing comment\n"
                                 "seed = 5\n"
                                 "model.m = 9\n"
                                 "model.m = 3\n");
    CHECK(cfg.task.known_classes == std::vector<std::string>{"mug", "chair", "lamp"});
    CHECK(cfg.task.seed == 5);  // task stream follows the experiment seed
    CHECK(cfg.k() == 3);
    CHECK(cfg.m == 3);

    // untouched keys keep their defaults
    CHECK(cfg.head == "proto");
    CHECK(cfg.part_head);
    CHECK(cfg.fusion == "cat");
    CHECK(cfg.d_r == 16);
    CHECK(cfg.weights.lambda1 == 0.1);
    CHECK(cfg.weights.lambda2 == 1.0);
    CHECK(cfg.weights.lambda3 == 1.0);
    CHECK(cfg.weights.tau == 0.1);
    CHECK(cfg.weights.delta == 0.1);
    CHECK(cfg.ot_epsilon == 0.05);
    CHECK(cfg.ot_max_iters == 1000);
    CHECK(cfg.pb_rounding == "argmax");
    CHECK(cfg.pufs.enabled);
    CHECK(cfg.pufs.lambda_lo == 0.6);
    CHECK(cfg.pufs.lambda_hi == 1.0);
    CHECK(cfg.pufs.known_ce_union);
    CHECK(cfg.lr == 1e-3);
    CHECK(cfg.epochs == 100);
    CHECK(cfg.batch == 16);

    auto bools = parse_config_text("task.known = mug\nseed = 1\n"
                                   "pufs.enabled = 0\nmodel.part_head = true\n");
    CHECK_FALSE(bools.pufs.enabled);
    CHECK(bools.part_head);
}

TEST_CASE("config parsing: malformed input is rejected") {
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\nnot_a_key = 3\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("task.known = mug\n"), ConfigError);  // no seed
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\nopt.lr = abc\n"), ParseError);
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\nopt.batch = 3.5\n"),
                    ParseError);
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\njust words\n"), ParseError);
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\nmodel.m =\n"), ParseError);
    CHECK_THROWS_AS(parse_config_text("task.known = mug\nseed = 1\npufs.enabled = maybe\n"),
                    ParseError);

    // line number of the offending key is reported
    try {
        parse_config_text("task.known = mug\nseed = 1\nbogus.key = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("config validation: incoherent switch combinations") {
    auto base = small_config_text();
    // fine as-is
    CHECK_NOTHROW(parse_config_text(base));

    auto bad = [&](const std::string& extra) { return base + extra; };
    CHECK_THROWS_AS(parse_config_text(bad("model.head = softmax\n")), ConfigError);
    CHECK_NOTHROW(parse_config_text(
        bad("model.head = softmax\nloss.lambda2 = 0\nloss.lambda3 = 0\npufs.enabled = off\n")));
    CHECK_THROWS_AS(parse_config_text(bad("model.part_head = off\n")), ConfigError);
    CHECK_NOTHROW(parse_config_text(
        bad("model.part_head = off\nloss.lambda2 = 0\nloss.lambda3 = 0\npufs.enabled = off\n")));
    CHECK_THROWS_AS(parse_config_text(bad("model.head = sofmax\npufs.enabled = off\n")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("model.fusion = sum\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("ot.rounding = nearest\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("model.m = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("model.d_r = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("ot.epsilon = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("ot.max_iters = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("opt.lr = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("opt.epochs = -1\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("opt.batch = 0\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("pufs.lambda_lo = 0.9\npufs.lambda_hi = 0.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("task.unknown = mug\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("task.known = mug, mug\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("task.known = unicorn\n")), ConfigError);
    CHECK_THROWS_AS(parse_config_text(bad("task.train_per_class = 0\n")), ConfigError);
}

TEST_CASE("config canonical text: stable round trip and hash") {
    auto cfg = parse_config_text(small_config_text() + "model.fusion = max\nopt.lr = 0.0025\n");
    std::string canon = canonical_config_text(cfg);
    auto cfg2 = parse_config_text(canon);
    CHECK(canonical_config_text(cfg2) == canon);
    CHECK(config_hash(cfg2) == config_hash(cfg));

    auto cfg3 = cfg;
    cfg3.seed = cfg.seed + 1;
    CHECK(config_hash(cfg3) != config_hash(cfg));
    auto cfg4 = cfg;
    cfg4.weights.tau = 0.25;
    CHECK(config_hash(cfg4) != config_hash(cfg));

    // no unknown-class line when the task has none
    auto closed = parse_config_text("task.known = mug\nseed = 3\n");
    CHECK(canonical_config_text(closed).find("task.unknown") == std::string::npos);
    CHECK(canonical_config_text(parse_config_text(canonical_config_text(closed))) ==
          canonical_config_text(closed));
}

TEST_CASE("feature width tracks head and fusion switches") {
    auto cfg = parse_config_text(small_config_text());
    CHECK(cfg.feature_width() == 2 * 2 * 4);  // K * M * d_r, concat fusion
    cfg.fusion = "max";
    CHECK(cfg.feature_width() == 4);
    cfg.fusion = "cat";
    cfg.part_head = false;
    CHECK(cfg.feature_width() == 8);  // encoder width
    cfg.part_head = true;
    cfg.head = "softmax";
    CHECK(cfg.feature_width() == 8);
}

TEST_CASE("model init: parameter registry per head") {
    auto cfg = parse_config_text(small_config_text());
    auto model = PartComModel::init(cfg);
    auto named = model.named_parameters();
    std::vector<std::string> names;
    for (auto& [n, t] : named) names.push_back(n);
    CHECK(names == std::vector<std::string>{"enc.w1", "enc.b1", "enc.w2", "enc.b2", "enc.w3",
                                            "enc.b3", "enc.wc", "enc.bc", "parts.p", "red.w",
                                            "red.b", "proto.c", "proto.v"});
    CHECK(model.bank.P.rows() == 4);  // K*M
    CHECK(model.bank.P.cols() == 8);
    CHECK(model.reducer.W.rows() == 8);
    CHECK(model.reducer.W.cols() == 4);
    CHECK(model.c_protos.rows() == 2);
    CHECK(model.c_protos.cols() == cfg.feature_width());
    CHECK(model.v_protos.rows() == 2);
    for (auto& t : model.parameters()) CHECK(t.requires_grad());

    auto soft = cfg;
    soft.head = "softmax";
    soft.weights.lambda2 = soft.weights.lambda3 = 0.0;
    soft.pufs.enabled = false;
    auto smodel = PartComModel::init(soft);
    auto snames = smodel.named_parameters();
    CHECK(snames.size() == 10);
    CHECK(snames[8].first == "cls.w");
    CHECK(snames[9].first == "cls.b");
    CHECK(smodel.w_cls.rows() == 8);
    CHECK(smodel.w_cls.cols() == 2);

    auto global = cfg;
    global.part_head = false;
    global.weights.lambda2 = global.weights.lambda3 = 0.0;
    global.pufs.enabled = false;
    auto gmodel = PartComModel::init(global);
    auto gnames = gmodel.named_parameters();
    CHECK(gnames.size() == 12);
    CHECK(gnames[8].first == "pool.w");
    CHECK(gnames[9].first == "pool.b");
    CHECK(gmodel.w_pool.rows() == 8);
    CHECK(gmodel.w_pool.cols() == 8);
    CHECK(gmodel.c_protos.cols() == 8);

    // same seed, same init; different seed, different init
    auto again = PartComModel::init(cfg);
    CHECK(again.bank.P.values() == model.bank.P.values());
    auto shifted = cfg;
    shifted.seed += 1;
    CHECK(PartComModel::init(shifted).bank.P.values() != model.bank.P.values());
}

TEST_CASE("model forward: shapes, prediction range, confidence") {
    auto cfg = parse_config_text(small_config_text());
    auto model = PartComModel::init(cfg);
    auto cloud = random_cloud(99, 64);
    auto nb = neighbor_lists(cloud, cfg.encoder.rho);
    auto f = model.forward(cloud, nb);
    CHECK(f.z.rows() == 64);
    CHECK(f.z.cols() == 8);
    CHECK(f.s.rows() == 4);
    CHECK(f.s.cols() == 64);
    CHECK(f.zp.rows() == 4);
    CHECK(f.zp.cols() == 8);
    CHECK(f.zc.rows() == 1);
    CHECK(f.zc.cols() == cfg.feature_width());
    int pred = model.predict(f);
    CHECK(pred >= 1);
    CHECK(pred <= 2);
    CHECK(std::isfinite(model.confidence(f)));

    auto soft = cfg;
    soft.head = "softmax";
    soft.weights.lambda2 = soft.weights.lambda3 = 0.0;
    soft.pufs.enabled = false;
    auto smodel = PartComModel::init(soft);
    auto sf = smodel.forward(cloud, nb);
    CHECK(sf.logits.rows() == 1);
    CHECK(sf.logits.cols() == 2);
    CHECK(sf.zc.cols() == 8);
    double conf = smodel.confidence(sf);
    CHECK(conf > 0.0);
    CHECK(conf <= 1.0);
}

TEST_CASE("checkpoint: save/load reproduces the model bitwise") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "partcom_ckpt_test";
    fs::create_directories(dir);
    auto path = (dir / "model.ckpt").string();

    auto cfg = parse_config_text(small_config_text());
    auto model = PartComModel::init(cfg);
    // nudge a parameter away from init so we are not just re-deriving it
    model.bank.P.values()[3] = 0.71828;

    auto ckpt = snapshot(model, 7, "rng-state-blob 1 2 3");
    save_checkpoint(path, ckpt);
    auto back = load_checkpoint(path);
    CHECK(back.config_text == ckpt.config_text);
    CHECK(back.config_hash == config_hash(cfg));
    CHECK(back.epoch == 7);
    CHECK(back.rng_state == "rng-state-blob 1 2 3");
    REQUIRE(back.params.size() == ckpt.params.size());
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        CHECK(back.params[i].first == ckpt.params[i].first);
        CHECK(back.params[i].second.values() == ckpt.params[i].second.values());
    }

    auto restored = restore_model(back);
    CHECK(restored.bank.P.values()[3] == 0.71828);
    auto cloud = random_cloud(5, 64);
    auto nb = neighbor_lists(cloud, cfg.encoder.rho);
    auto zc0 = model.forward(cloud, nb).zc.values();
    auto zc1 = restored.forward(cloud, nb).zc.values();
    CHECK(zc0 == zc1);

    // saving the same checkpoint twice produces identical bytes
    auto path2 = (dir / "model2.ckpt").string();
    save_checkpoint(path2, ckpt);
    CHECK(slurp(path) == slurp(path2));
    fs::remove_all(dir);
}

TEST_CASE("checkpoint: corrupt or mismatched data is rejected") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "partcom_ckpt_bad";
    fs::create_directories(dir);
    auto cfg = parse_config_text(small_config_text());
    auto model = PartComModel::init(cfg);
    auto ckpt = snapshot(model, 1, "s");
    auto path = (dir / "ok.ckpt").string();
    save_checkpoint(path, ckpt);

    // truncation
    std::string bytes = slurp(path);
    {
        std::ofstream f(dir / "short.ckpt", std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint((dir / "short.ckpt").string()), ParseError);

    // wrong magic
    {
        std::string mangled = bytes;
        mangled[0] = 'X';
        std::ofstream f(dir / "magic.ckpt", std::ios::binary);
        f.write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    }
    CHECK_THROWS_AS(load_checkpoint((dir / "magic.ckpt").string()), ParseError);

    CHECK_THROWS_AS(load_checkpoint((dir / "absent.ckpt").string()), ParseError);

    // parameter list that disagrees with the embedded config
    auto renamed = ckpt;
    renamed.params[8].first = "parts.q";
    CHECK_THROWS_AS(restore_model(renamed), ParseError);
    auto reshaped = ckpt;
    reshaped.params[8].second = Tensor::zeros(2, 2);
    CHECK_THROWS_AS(restore_model(reshaped), ParseError);
    fs::remove_all(dir);
}
