#include "docadv/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "docadv/rng.hpp"

namespace docadv {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument(msg); }

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<double> split_doubles(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            invalid("config: " + key + ": '" + tok + "' is not a number");
        out.push_back(v);
    }
    return out;
}

int to_int(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        invalid("config: " + key + ": '" + s + "' is not an integer");
    }
}

double to_double(const std::string& key, const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        invalid("config: " + key + ": '" + s + "' is not a number");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        invalid("config: " + key + ": '" + s + "' is not an unsigned integer");
    }
}

bool to_bool(const std::string& key, const std::string& s) {
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    invalid("config: " + key + ": '" + s + "' is not a boolean");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::string join(const std::vector<double>& items) {
    std::string out;
    for (double v : items) out += (out.empty() ? std::string() : std::string(",")) + fmt(v);
    return out;
}

}  // namespace

AttackConfig RunConfig::attack_defaults() const {
    AttackConfig cfg;
    cfg.threat.strength = attack_strength;
    cfg.steps = attack_steps;
    cfg.momentum_decay = momentum;
    cfg.spsa_batch = spsa_batch;
    cfg.spsa_delta = spsa_delta;
    cfg.seed = derive_seed(seed, "attack");
    return cfg;
}

void RunConfig::validate() const {
    CorpusSpec c = corpus;
    c.seed = 1;
    c.validate();
    if (epochs < 1) invalid("config: train.epochs must be >= 1");
    if (batch_size < 1) invalid("config: train.batch must be >= 1");
    if (lr <= 0 || lr_decay <= 0) invalid("config: learning rate and decay must be positive");
    if (adv_epsilon < 0) invalid("config: train.adv_epsilon must be >= 0");
    if (adv_steps < 1) invalid("config: train.adv_steps must be >= 1");
    if (jpeg_quality < 1 || jpeg_quality > 100)
        invalid("config: defense.jpeg_quality outside [1,100]");
    if (eval_subset < 1 || sweep_subset < 1) invalid("config: eval subsets must be >= 1");
    if (workers < 0) invalid("config: eval.workers must be >= 0");
    if (presets.empty()) invalid("config: model.presets must not be empty");
    for (const auto& p : presets)
        if (p != "mini-convnet" && p != "mini-resnet")
            invalid("config: unknown preset '" + p + "'");
    if (train_mode != "natural" && train_mode != "adversarial")
        invalid("config: train.mode must be natural or adversarial");
    for (const auto& rows : defense_rows)
        (void)rows;  // row tokens validated when the matrix is built
    if (attack_steps < 1 || attack_strength < 1)
        invalid("config: attack.steps and attack.strength must be >= 1");
    if (momentum < 0) invalid("config: attack.momentum must be >= 0");
    if (spsa_batch < 1) invalid("config: attack.spsa_batch must be >= 1");
    if (spsa_delta <= 0) invalid("config: attack.spsa_delta must be positive");
    for (const auto* grid : {&grid_linf, &grid_l2}) {
        if (grid->empty()) invalid("config: sweep grids must not be empty");
        for (std::size_t i = 1; i < grid->size(); ++i)
            if ((*grid)[i] <= (*grid)[i - 1])
                invalid("config: sweep grids must be strictly increasing");
        if ((*grid)[0] < 0) invalid("config: sweep grids must be nonnegative");
    }
}

std::string RunConfig::resolved_text() const {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(seed);
    kv["out"] = out_dir;
    kv["data.dir"] = data_dir;
    kv["corpus.classes"] = std::to_string(corpus.num_classes);
    kv["corpus.train_per_class"] = std::to_string(corpus.train_per_class);
    kv["corpus.val_per_class"] = std::to_string(corpus.val_per_class);
    kv["corpus.test_per_class"] = std::to_string(corpus.test_per_class);
    kv["corpus.height"] = std::to_string(corpus.height);
    kv["corpus.width"] = std::to_string(corpus.width);
    kv["corpus.noise"] = fmt(corpus.noise_sigma);
    kv["model.presets"] = join(presets);
    kv["train.preset"] = train_preset;
    kv["train.mode"] = train_mode;
    kv["train.epochs"] = std::to_string(epochs);
    kv["train.batch"] = std::to_string(batch_size);
    kv["train.lr"] = fmt(lr);
    kv["train.lr_decay"] = fmt(lr_decay);
    kv["train.adv_epsilon"] = fmt(adv_epsilon);
    kv["train.adv_steps"] = std::to_string(adv_steps);
    kv["defense.jpeg_quality"] = std::to_string(jpeg_quality);
    kv["eval.defenses"] = join(defense_rows);
    kv["eval.subset"] = std::to_string(eval_subset);
    kv["eval.workers"] = std::to_string(workers);
    kv["eval.attacks"] = join(eval_attacks);
    kv["eval.anchor_linf"] = fmt(anchor_linf);
    kv["eval.anchor_l2"] = fmt(anchor_l2);
    kv["eval.spsa_on_grey"] = spsa_on_grey ? "1" : "0";
    kv["eval.dump_dir"] = dump_dir;
    kv["sweep.subset"] = std::to_string(sweep_subset);
    kv["sweep.grid_linf"] = join(grid_linf);
    kv["sweep.grid_l2"] = join(grid_l2);
    kv["attack.steps"] = std::to_string(attack_steps);
    kv["attack.strength"] = std::to_string(attack_strength);
    kv["attack.momentum"] = fmt(momentum);
    kv["attack.spsa_batch"] = std::to_string(spsa_batch);
    kv["attack.spsa_delta"] = fmt(spsa_delta);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            invalid("config line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                    line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "seed") cfg.seed = to_u64(key, value);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "data.dir") cfg.data_dir = value;
        else if (key == "corpus.classes") cfg.corpus.num_classes = to_int(key, value);
        else if (key == "corpus.train_per_class") cfg.corpus.train_per_class = to_int(key, value);
        else if (key == "corpus.val_per_class") cfg.corpus.val_per_class = to_int(key, value);
        else if (key == "corpus.test_per_class") cfg.corpus.test_per_class = to_int(key, value);
        else if (key == "corpus.height") cfg.corpus.height = to_int(key, value);
        else if (key == "corpus.width") cfg.corpus.width = to_int(key, value);
        else if (key == "corpus.noise") cfg.corpus.noise_sigma = to_double(key, value);
        else if (key == "model.presets") cfg.presets = split_list(value);
        else if (key == "train.preset") cfg.train_preset = value;
        else if (key == "train.mode") cfg.train_mode = value;
        else if (key == "train.epochs") cfg.epochs = to_int(key, value);
        else if (key == "train.batch") cfg.batch_size = to_int(key, value);
        else if (key == "train.lr") cfg.lr = to_double(key, value);
        else if (key == "train.lr_decay") cfg.lr_decay = to_double(key, value);
        else if (key == "train.adv_epsilon") cfg.adv_epsilon = to_double(key, value);
        else if (key == "train.adv_steps") cfg.adv_steps = to_int(key, value);
        else if (key == "defense.jpeg_quality") cfg.jpeg_quality = to_int(key, value);
        else if (key == "eval.defenses") cfg.defense_rows = split_list(value);
        else if (key == "eval.subset") cfg.eval_subset = to_int(key, value);
        else if (key == "eval.workers") cfg.workers = to_int(key, value);
        else if (key == "eval.attacks") cfg.eval_attacks = split_list(value);
        else if (key == "eval.anchor_linf") cfg.anchor_linf = to_double(key, value);
        else if (key == "eval.anchor_l2") cfg.anchor_l2 = to_double(key, value);
        else if (key == "eval.spsa_on_grey") cfg.spsa_on_grey = to_bool(key, value);
        else if (key == "eval.dump_dir") cfg.dump_dir = value;
        else if (key == "sweep.subset") cfg.sweep_subset = to_int(key, value);
        else if (key == "sweep.grid_linf") cfg.grid_linf = split_doubles(key, value);
        else if (key == "sweep.grid_l2") cfg.grid_l2 = split_doubles(key, value);
        else if (key == "attack.steps") cfg.attack_steps = to_int(key, value);
        else if (key == "attack.strength") cfg.attack_strength = to_int(key, value);
        else if (key == "attack.momentum") cfg.momentum = to_double(key, value);
        else if (key == "attack.spsa_batch") cfg.spsa_batch = to_int(key, value);
        else if (key == "attack.spsa_delta") cfg.spsa_delta = to_double(key, value);
        else invalid("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) invalid("config: cannot open " + path.string());
    const std::string text(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
    return parse_config_text(text);
}

}  // namespace docadv
