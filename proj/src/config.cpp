#include "partcom/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "partcom/errors.hpp"
#include "partcom/rng.hpp"

namespace partcom {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    double x = std::strtod(s, &end);
    if (end == s || *end != '\0') throw ParseError("config: bad number for '" + key + "': " + v);
    return x;
}

long parse_int(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    long x = std::strtol(s, &end, 10);
    if (end == s || *end != '\0') throw ParseError("config: bad integer for '" + key + "': " + v);
    return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    unsigned long long x = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
        throw ParseError("config: bad unsigned integer for '" + key + "': " + v);
    return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ParseError("config: bad boolean for '" + key + "': " + v + " (use on/off)");
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::size_t ExperimentConfig::feature_width() const {
    if (head == "softmax") return encoder.d;
    if (!part_head) return encoder.d;
    if (fusion == "max") return d_r;
    return static_cast<std::size_t>(k()) * static_cast<std::size_t>(m) * d_r;
}

void ExperimentConfig::validate() const {
    validate_task_spec(task);
    if (head != "proto" && head != "softmax")
        throw ConfigError("head must be proto or softmax, got '" + head + "'");
    if (fusion != "cat" && fusion != "max")
        throw ConfigError("fusion must be cat or max, got '" + fusion + "'");
    if (pb_rounding != "argmax" && pb_rounding != "greedy")
        throw ConfigError("ot.rounding must be argmax or greedy, got '" + pb_rounding + "'");
    if (m < 1) throw ConfigError("model.m must be at least 1");
    if (d_r < 1) throw ConfigError("model.d_r must be at least 1");
    weights.validate();
    if (ot_epsilon <= 0.0) throw ConfigError("ot.epsilon must be positive");
    if (ot_max_iters < 1) throw ConfigError("ot.max_iters must be at least 1");
    if (pufs.enabled) {
        pufs.validate();
        if (head != "proto" || !part_head)
            throw ConfigError("pufs requires the part-prototype head");
    }
    if (head == "softmax" || !part_head) {
        // No part prototypes exist, so the balance/diversity terms have
        // nothing to act on; insist the config says so instead of silently
        // dropping them.
        if (weights.lambda2 != 0.0 || weights.lambda3 != 0.0)
            throw ConfigError("loss.lambda2 and loss.lambda3 require the part head (set them to 0)");
    }
    if (!(lr > 0.0)) throw ConfigError("opt.lr must be positive");
    if (epochs < 0) throw ConfigError("opt.epochs must be nonnegative");
    if (batch < 1) throw ConfigError("opt.batch must be at least 1");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    bool seed_seen = false;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config: expected 'key = value' (line " + std::to_string(line_no) +
                             ")");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ParseError("config: empty key or value (line " + std::to_string(line_no) + ")");

        if (key == "task.protocol") cfg.task.protocol = val;
        else if (key == "task.known") cfg.task.known_classes = parse_list(val);
        else if (key == "task.unknown") cfg.task.unknown_classes = parse_list(val);
        else if (key == "task.train_per_class") cfg.task.train_per_class = static_cast<int>(parse_int(key, val));
        else if (key == "task.test_per_class") cfg.task.test_per_class = static_cast<int>(parse_int(key, val));
        else if (key == "task.points") cfg.task.points = static_cast<std::size_t>(parse_int(key, val));
        else if (key == "task.mix_radius") cfg.task.mix_radius = parse_double(key, val);
        else if (key == "encoder.h1") cfg.encoder.h1 = static_cast<std::size_t>(parse_int(key, val));
        else if (key == "encoder.h2") cfg.encoder.h2 = static_cast<std::size_t>(parse_int(key, val));
        else if (key == "encoder.d") cfg.encoder.d = static_cast<std::size_t>(parse_int(key, val));
        else if (key == "encoder.rho") cfg.encoder.rho = parse_double(key, val);
        else if (key == "model.head") cfg.head = val;
        else if (key == "model.part_head") cfg.part_head = parse_bool(key, val);
        else if (key == "model.fusion") cfg.fusion = val;
        else if (key == "model.m") cfg.m = static_cast<int>(parse_int(key, val));
        else if (key == "model.d_r") cfg.d_r = static_cast<std::size_t>(parse_int(key, val));
        else if (key == "loss.lambda1") cfg.weights.lambda1 = parse_double(key, val);
        else if (key == "loss.lambda2") cfg.weights.lambda2 = parse_double(key, val);
        else if (key == "loss.lambda3") cfg.weights.lambda3 = parse_double(key, val);
        else if (key == "loss.tau") cfg.weights.tau = parse_double(key, val);
        else if (key == "loss.delta") cfg.weights.delta = parse_double(key, val);
        else if (key == "ot.epsilon") cfg.ot_epsilon = parse_double(key, val);
        else if (key == "ot.max_iters") cfg.ot_max_iters = static_cast<int>(parse_int(key, val));
        else if (key == "ot.rounding") cfg.pb_rounding = val;
        else if (key == "pufs.enabled") cfg.pufs.enabled = parse_bool(key, val);
        else if (key == "pufs.lambda_lo") cfg.pufs.lambda_lo = parse_double(key, val);
        else if (key == "pufs.lambda_hi") cfg.pufs.lambda_hi = parse_double(key, val);
        else if (key == "pufs.known_ce_union") cfg.pufs.known_ce_union = parse_bool(key, val);
        else if (key == "pufs.weight") cfg.pufs.weight = parse_double(key, val);
        else if (key == "opt.lr") cfg.lr = parse_double(key, val);
        else if (key == "opt.epochs") cfg.epochs = static_cast<int>(parse_int(key, val));
        else if (key == "opt.batch") cfg.batch = static_cast<int>(parse_int(key, val));
        else if (key == "seed") { cfg.seed = parse_u64(key, val); seed_seen = true; }
        else throw ConfigError("config: unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    if (!seed_seen) throw ConfigError("config must set seed");
    cfg.task.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config_text(os.str());
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "task.protocol = " << cfg.task.protocol << "\n";
    os << "task.known = " << join(cfg.task.known_classes) << "\n";
    if (!cfg.task.unknown_classes.empty())
        os << "task.unknown = " << join(cfg.task.unknown_classes) << "\n";
    os << "task.train_per_class = " << cfg.task.train_per_class << "\n";
    os << "task.test_per_class = " << cfg.task.test_per_class << "\n";
    os << "task.points = " << cfg.task.points << "\n";
    os << "task.mix_radius = " << fmt(cfg.task.mix_radius) << "\n";
    os << "encoder.h1 = " << cfg.encoder.h1 << "\n";
    os << "encoder.h2 = " << cfg.encoder.h2 << "\n";
    os << "encoder.d = " << cfg.encoder.d << "\n";
    os << "encoder.rho = " << fmt(cfg.encoder.rho) << "\n";
    os << "model.head = " << cfg.head << "\n";
    os << "model.part_head = " << (cfg.part_head ? "on" : "off") << "\n";
    os << "model.fusion = " << cfg.fusion << "\n";
    os << "model.m = " << cfg.m << "\n";
    os << "model.d_r = " << cfg.d_r << "\n";
    os << "loss.lambda1 = " << fmt(cfg.weights.lambda1) << "\n";
    os << "loss.lambda2 = " << fmt(cfg.weights.lambda2) << "\n";
    os << "loss.lambda3 = " << fmt(cfg.weights.lambda3) << "\n";
    os << "loss.tau = " << fmt(cfg.weights.tau) << "\n";
    os << "loss.delta = " << fmt(cfg.weights.delta) << "\n";
    os << "ot.epsilon = " << fmt(cfg.ot_epsilon) << "\n";
    os << "ot.max_iters = " << cfg.ot_max_iters << "\n";
    os << "ot.rounding = " << cfg.pb_rounding << "\n";
    os << "pufs.enabled = " << (cfg.pufs.enabled ? "on" : "off") << "\n";
    os << "pufs.lambda_lo = " << fmt(cfg.pufs.lambda_lo) << "\n";
    os << "pufs.lambda_hi = " << fmt(cfg.pufs.lambda_hi) << "\n";
    os << "pufs.known_ce_union = " << (cfg.pufs.known_ce_union ? "on" : "off") << "\n";
    os << "pufs.weight = " << fmt(cfg.pufs.weight) << "\n";
    os << "opt.lr = " << fmt(cfg.lr) << "\n";
    os << "opt.epochs = " << cfg.epochs << "\n";
    os << "opt.batch = " << cfg.batch << "\n";
    os << "seed = " << cfg.seed << "\n";
    return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a64(canonical_config_text(cfg));
}

}  // namespace partcom
