#include "docadv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "docadv/image_io.hpp"
#include "docadv/parallel.hpp"
#include "docadv/rng.hpp"

namespace docadv {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument(msg); }

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string format_eps(double eps) { return format_double("%g", eps); }

void fill_metrics(EvalReport& report) {
    report.n = static_cast<int>(report.records.size());
    report.m = clean_correct_count(report.records);
    report.accuracy = accuracy_from_records(report.records);
    const auto asr = asr_from_records(report.records);
    report.asr_defined = asr.has_value();
    report.asr = asr.value_or(0.0);
}

}  // namespace

double accuracy_from_records(const std::vector<ExampleRecord>& records) {
    if (records.empty()) invalid("accuracy: no records");
    int correct = 0;
    for (const auto& r : records)
        if (r.adv_pred == r.y_true) ++correct;
    return static_cast<double>(correct) / records.size();
}

int clean_correct_count(const std::vector<ExampleRecord>& records) {
    int m = 0;
    for (const auto& r : records)
        if (r.clean_pred == r.y_true) ++m;
    return m;
}

std::optional<double> asr_from_records(const std::vector<ExampleRecord>& records) {
    const int m = clean_correct_count(records);
    if (m == 0) return std::nullopt;
    int flipped = 0;
    for (const auto& r : records)
        if (r.clean_pred == r.y_true && r.adv_pred != r.y_true) ++flipped;
    return static_cast<double>(flipped) / m;
}

const std::vector<std::string>& attack_names() {
    static const std::vector<std::string> names = {"none",     "fgm-linf", "fgm-l2",
                                                   "bim-linf", "bim-l2",   "mim-linf",
                                                   "mim-l2",   "spsa"};
    return names;
}

AttackInstance parse_attack_name(const std::string& name, const AttackConfig& defaults) {
    AttackInstance out;
    out.name = name;
    out.config = defaults;
    if (name == "none") return out;
    if (name == "fgm-linf" || name == "fgm-l2") out.config.method = AttackMethod::Fgm;
    else if (name == "bim-linf" || name == "bim-l2") out.config.method = AttackMethod::Bim;
    else if (name == "mim-linf" || name == "mim-l2") out.config.method = AttackMethod::Mim;
    else if (name == "spsa") out.config.method = AttackMethod::Spsa;
    else {
        std::string known;
        for (const auto& n : attack_names()) known += (known.empty() ? "" : ", ") + n;
        invalid("unknown attack '" + name + "' (valid: " + known + ")");
    }
    out.config.threat.norm =
        name.size() >= 3 && name.compare(name.size() - 3, 3, "-l2") == 0 ? Norm::L2 : Norm::LInf;
    return out;
}

std::vector<int> clean_predictions(const TrainedModel& model,
                                   const std::vector<LabeledImage>& examples, int workers) {
    std::vector<int> preds(examples.size());
    parallel_for(static_cast<int>(examples.size()), workers,
                 [&](int i) { preds[i] = classify(model, examples[i].pixels); });
    return preds;
}

EvalReport evaluate_attack(const TrainedModel& model, const AttackInstance& attack,
                           const std::vector<LabeledImage>& examples, int workers,
                           const std::vector<int>* cached_clean,
                           std::vector<Tensor>* adversarial_out) {
    if (examples.empty()) invalid("evaluate_attack: no examples");
    std::vector<int> clean;
    if (!cached_clean) {
        clean = clean_predictions(model, examples, workers);
        cached_clean = &clean;
    }

    EvalReport report;
    report.attack_desc = attack.name;
    report.epsilon = attack.name == "none" ? 0.0 : attack.config.threat.epsilon;
    report.records.resize(examples.size());
    if (adversarial_out) adversarial_out->resize(examples.size());

    if (attack.name == "none") {
        for (std::size_t i = 0; i < examples.size(); ++i) {
            ExampleRecord& r = report.records[i];
            r.id = examples[i].id;
            r.y_true = examples[i].label;
            r.clean_pred = (*cached_clean)[i];
            r.adv_pred = r.clean_pred;
            if (adversarial_out) (*adversarial_out)[i] = examples[i].pixels;
        }
        fill_metrics(report);
        return report;
    }

    attack.config.validate();
    const auto target = make_attack_target(model);
    parallel_for(static_cast<int>(examples.size()), workers, [&](int i) {
        AttackConfig per_image = attack.config;
        per_image.seed = derive_seed(attack.config.seed, static_cast<std::uint64_t>(i));
        const AttackResult result =
            run_attack(*target, examples[i].pixels, examples[i].label, per_image);
        ExampleRecord& r = report.records[i];
        r.id = examples[i].id;
        r.y_true = examples[i].label;
        r.clean_pred = (*cached_clean)[i];
        r.adv_pred = classify(model, result.image);
        r.achieved_norm = achieved_norm(result.image, examples[i].pixels, per_image.threat.norm);
        r.queries = result.queries;
        if (result.outcome != AttackOutcome::Ok) r.flag = outcome_name(result.outcome);
        if (adversarial_out) (*adversarial_out)[i] = result.image;
    });
    fill_metrics(report);
    return report;
}

EvalReport evaluate_transfer(const TrainedModel& substitute, const std::string& substitute_id,
                             const TrainedModel& target, const AttackInstance& attack,
                             const std::vector<LabeledImage>& examples, int workers,
                             const std::vector<int>* cached_clean) {
    if (examples.empty()) invalid("evaluate_transfer: no examples");
    std::vector<int> clean;
    if (!cached_clean) {
        clean = clean_predictions(target, examples, workers);
        cached_clean = &clean;
    }
    const TransferOutcome outcome =
        transfer_attack(substitute, target, examples, attack.config, workers);

    EvalReport report;
    report.attack_desc = attack.name + "(" + substitute_id + ")";
    report.epsilon = attack.config.threat.epsilon;
    report.records.resize(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        ExampleRecord& r = report.records[i];
        r.id = examples[i].id;
        r.y_true = examples[i].label;
        r.clean_pred = (*cached_clean)[i];
        r.adv_pred = outcome.target_predictions[i];
        r.achieved_norm =
            achieved_norm(outcome.crafted[i].image, examples[i].pixels, attack.config.threat.norm);
        r.queries = outcome.crafted[i].queries;
        if (outcome.crafted[i].outcome != AttackOutcome::Ok)
            r.flag = outcome_name(outcome.crafted[i].outcome);
    }
    fill_metrics(report);
    return report;
}

double accuracy(const TrainedModel& model, const AttackInstance& attack,
                const std::vector<LabeledImage>& examples, int workers) {
    return evaluate_attack(model, attack, examples, workers).accuracy;
}

std::optional<double> attack_success_rate(const TrainedModel& model, const AttackInstance& attack,
                                          const std::vector<LabeledImage>& examples, int workers) {
    const EvalReport report = evaluate_attack(model, attack, examples, workers);
    if (!report.asr_defined) return std::nullopt;
    return report.asr;
}

SweepResult sweep_epsilon(const TrainedModel& model, const AttackInstance& attack_template,
                          const std::vector<double>& grid,
                          const std::vector<LabeledImage>& examples, int workers) {
    if (attack_template.name == "none") invalid("sweep_epsilon: sweep needs a real attack");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) invalid("sweep_epsilon: grid must be strictly increasing");

    const std::vector<int> clean = clean_predictions(model, examples, workers);
    SweepResult out;
    out.grid = grid;
    for (double eps : grid) {
        if (eps == 0.0) {
            AttackInstance identity;
            identity.name = "none";
            EvalReport zero = evaluate_attack(model, identity, examples, workers, &clean);
            zero.attack_desc = attack_template.name;
            out.points.push_back(std::move(zero));
            continue;
        }
        AttackInstance instance = attack_template;
        instance.config.threat.epsilon = eps;
        out.points.push_back(evaluate_attack(model, instance, examples, workers, &clean));
    }
    return out;
}

EvalPoint make_point(const EvalReport& report, const std::string& backbone,
                     const std::string& defense, const std::string& training_mode,
                     const std::string& attack, const std::string& norm, std::uint64_t seed) {
    EvalPoint p;
    p.backbone = backbone;
    p.defense = defense;
    p.training_mode = training_mode;
    p.attack = attack;
    p.norm = norm;
    p.epsilon = report.epsilon;
    p.n = report.n;
    p.m = report.m;
    p.accuracy = report.accuracy;
    p.asr_defined = report.asr_defined;
    p.asr = report.asr;
    double queries = 0.0;
    for (const auto& r : report.records) queries += static_cast<double>(r.queries);
    p.mean_queries = report.records.empty() ? 0.0 : queries / report.records.size();
    p.seed = seed;
    return p;
}

std::string to_csv(std::vector<EvalPoint> points) {
    std::sort(points.begin(), points.end(), [](const EvalPoint& a, const EvalPoint& b) {
        return std::tie(a.backbone, a.defense, a.attack, a.norm, a.epsilon) <
               std::tie(b.backbone, b.defense, b.attack, b.norm, b.epsilon);
    });
    std::string out = "backbone,defense,training_mode,attack,norm,epsilon,n,m,accuracy,asr,"
                      "mean_queries,seed\n";
    for (const auto& p : points) {
        out += p.backbone + ',' + p.defense + ',' + p.training_mode + ',' + p.attack + ',' +
               p.norm + ',' + format_eps(p.epsilon) + ',' + std::to_string(p.n) + ',' +
               std::to_string(p.m) + ',' + format_double("%.6f", p.accuracy) + ',' +
               (p.asr_defined ? format_double("%.6f", p.asr) : std::string("na")) + ',' +
               format_double("%.2f", p.mean_queries) + ',' + std::to_string(p.seed) + '\n';
    }
    return out;
}

std::vector<EvalPoint> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) invalid("parse_csv: empty input");
    std::vector<EvalPoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            cols.push_back(
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cols.size() != 12) invalid("parse_csv: malformed row '" + line + "'");
        EvalPoint p;
        p.backbone = cols[0];
        p.defense = cols[1];
        p.training_mode = cols[2];
        p.attack = cols[3];
        p.norm = cols[4];
        p.epsilon = std::strtod(cols[5].c_str(), nullptr);
        p.n = std::stoi(cols[6]);
        p.m = std::stoi(cols[7]);
        p.accuracy = std::strtod(cols[8].c_str(), nullptr);
        p.asr_defined = cols[9] != "na";
        p.asr = p.asr_defined ? std::strtod(cols[9].c_str(), nullptr) : 0.0;
        p.mean_queries = std::strtod(cols[10].c_str(), nullptr);
        p.seed = std::stoull(cols[11]);
        points.push_back(std::move(p));
    }
    return points;
}

namespace {

std::string pct(double v) { return format_double("%.1f", v * 100.0); }

bool is_transfer(const EvalPoint& p) { return p.attack.rfind("transfer-", 0) == 0; }

// substring between '(' and ')' of a transfer attack name
std::string transfer_substitute(const std::string& attack) {
    const auto open = attack.find('(');
    const auto close = attack.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close <= open) return "";
    return attack.substr(open + 1, close - open - 1);
}

}  // namespace

std::string to_markdown(const std::vector<EvalPoint>& points, double anchor_linf,
                        double anchor_l2) {
    std::set<std::string> backbones;
    std::vector<std::string> defenses;  // first-seen order
    for (const auto& p : points) {
        backbones.insert(p.backbone);
        if (std::find(defenses.begin(), defenses.end(), p.defense) == defenses.end())
            defenses.push_back(p.defense);
    }

    std::ostringstream md;
    md << "# Robustness report\n\n";

    md << "## Clean accuracy (%)\n\n| Defense |";
    for (const auto& b : backbones) md << ' ' << b << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < backbones.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& d : defenses) {
        md << "| " << d << " |";
        for (const auto& b : backbones) {
            std::string cell = "-";
            for (const auto& p : points)
                if (p.backbone == b && p.defense == d && p.attack == "none" && p.epsilon == 0.0)
                    cell = pct(p.accuracy);
            md << ' ' << cell << " |";
        }
        md << '\n';
    }

    const std::vector<std::pair<std::string, std::string>> columns = {
        {"fgm", "linf"}, {"bim", "linf"}, {"mim", "linf"}, {"fgm", "l2"},
        {"bim", "l2"},   {"mim", "l2"},   {"spsa", "linf"}};
    md << "\n## Accuracy under attack (%), budgets " << format_eps(anchor_linf) << " (linf) / "
       << format_eps(anchor_l2) << " (l2)\n\n| Backbone | Defense |";
    for (const auto& [method, norm] : columns) md << ' ' << method << '-' << norm << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& b : backbones)
        for (const auto& d : defenses) {
            bool any = false;
            std::ostringstream row;
            row << "| " << b << " | " << d << " |";
            for (const auto& [method, norm] : columns) {
                const double anchor = norm == "linf" ? anchor_linf : anchor_l2;
                std::string cell = "-";
                for (const auto& p : points)
                    if (p.backbone == b && p.defense == d && p.attack == method &&
                        p.norm == norm && p.epsilon == anchor) {
                        cell = pct(p.accuracy);
                        any = true;
                    }
                row << ' ' << cell << " |";
            }
            if (any) md << row.str() << '\n';
        }

    std::vector<std::string> transfer_cols;
    for (const auto& p : points)
        if (is_transfer(p) &&
            std::find(transfer_cols.begin(), transfer_cols.end(), p.attack) == transfer_cols.end())
            transfer_cols.push_back(p.attack);
    std::sort(transfer_cols.begin(), transfer_cols.end());
    if (!transfer_cols.empty()) {
        md << "\n## Accuracy under transfer attack (%)\n\n| Backbone | Defense |";
        for (const auto& c : transfer_cols) md << ' ' << c << " |";
        md << "\n|---|---|";
        for (std::size_t i = 0; i < transfer_cols.size(); ++i) md << "---|";
        md << '\n';
        for (const auto& b : backbones)
            for (const auto& d : defenses) {
                bool any = false;
                std::ostringstream row;
                row << "| " << b << " | " << d << " |";
                for (const auto& c : transfer_cols) {
                    // substitutes never re-attack their own backbone family
                    if (transfer_substitute(c).rfind(b, 0) == 0) {
                        row << " n/a |";
                        any = true;
                        continue;
                    }
                    std::string cell = "-";
                    for (const auto& p : points)
                        if (p.backbone == b && p.defense == d && p.attack == c) {
                            cell = pct(p.accuracy);
                            any = true;
                        }
                    row << ' ' << cell << " |";
                }
                if (any) md << row.str() << '\n';
            }
    }
    return md.str();
}

std::string to_svg_curves(const std::vector<EvalPoint>& points, const std::string& norm) {
    std::map<std::string, std::map<double, double>> series;
    double max_eps = 0.0;
    for (const auto& p : points) {
        if (p.attack == "none" || is_transfer(p)) continue;
        if (p.norm != norm) continue;
        series[p.backbone + "/" + p.defense + "/" + p.attack][p.epsilon] = p.accuracy;
        max_eps = std::max(max_eps, p.epsilon);
    }
    const int width = 760, height = 440;
    const double left = 60, top = 30;
    const double plot_w = 440, plot_h = 340;
    if (max_eps <= 0.0) max_eps = 1.0;

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double acc = i * 0.25;
        const double y = top + plot_h * (1.0 - acc);
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << format_double("%.2f", acc)
            << "</text>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    }
    std::set<double> ticks;
    for (const auto& [key, curve] : series)
        for (const auto& [eps, acc] : curve) ticks.insert(eps);
    for (double eps : ticks) {
        const double x = left + plot_w * (eps / max_eps);
        svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 16
            << "\" font-size=\"10\" text-anchor=\"middle\">" << format_eps(eps) << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 24
        << "\" font-size=\"12\" text-anchor=\"middle\">perturbation budget (" << norm
        << ")</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">accuracy</text>\n";

    int color = 0;
    for (const auto& [key, curve] : series) {
        const char* stroke = palette[color % 10];
        std::ostringstream path;
        bool first = true;
        for (const auto& [eps, acc] : curve) {
            const double x = left + plot_w * (eps / max_eps);
            const double y = top + plot_h * (1.0 - acc);
            path << (first ? 'M' : 'L') << format_double("%.1f", x) << ' '
                 << format_double("%.1f", y) << ' ';
            first = false;
        }
        svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << stroke
            << "\" stroke-width=\"1.5\"/>\n";
        const double ly = top + 14.0 * color;
        svg << "<rect x=\"" << left + plot_w + 12 << "\" y=\"" << ly - 8
            << "\" width=\"10\" height=\"10\" fill=\"" << stroke << "\"/>\n";
        svg << "<text x=\"" << left + plot_w + 26 << "\" y=\"" << ly << "\" font-size=\"10\">"
            << key << "</text>\n";
        ++color;
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
}

void dump_adversarial_examples(const std::filesystem::path& dir, const std::string& split,
                               const AttackInstance& attack, const EvalReport& report,
                               const std::vector<Tensor>& adversarial) {
    if (adversarial.size() != report.records.size())
        invalid("dump_adversarial_examples: image count does not match records");
    std::filesystem::create_directories(dir);
    const std::string norm =
        attack.name == "none" ? "none" : norm_name(attack.config.threat.norm);
    const std::string eps = format_eps(report.epsilon);
    std::string manifest = "index,true_label,clean_pred,adv_pred,achieved_norm,queries\n";
    for (std::size_t i = 0; i < adversarial.size(); ++i) {
        const ExampleRecord& r = report.records[i];
        const std::string name =
            split + "_" + std::to_string(i) + "_" + attack.name + "_" + norm + "_" + eps + ".png";
        write_png(dir / name, to_u8(adversarial[i]));
        manifest += std::to_string(i) + ',' + std::to_string(r.y_true) + ',' +
                    std::to_string(r.clean_pred) + ',' + std::to_string(r.adv_pred) + ',' +
                    format_double("%.8f", r.achieved_norm) + ',' + std::to_string(r.queries) +
                    '\n';
    }
    write_text_file(dir / (split + "_" + attack.name + "_" + norm + "_" + eps + "_manifest.csv"),
                    manifest);
}

}  // namespace docadv
