#include "recode/runner.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "recode/mlp.hpp"
#include "recode/ode.hpp"

namespace recode {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw std::runtime_error("config: key '" + key + "' has value '" + value +
                             "', expected " + expected);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     ": expected key=value");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config: line " + std::to_string(line_no) + ": empty key");
        }
        for (char c : key) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_') {
                throw std::runtime_error("config: line " + std::to_string(line_no) +
                                         ": bad key '" + key + "'");
            }
        }
        if (!cfg.values_.emplace(key, value).second) {
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     ": duplicate key '" + key + "'");
        }
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str());
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t v = 0;
    const char* b = it->second.data();
    const char* e = b + it->second.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) bad_value(key, it->second, "an integer");
    return v;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const char* b = it->second.data();
    const char* e = b + it->second.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) bad_value(key, it->second, "a non-negative integer");
    return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) bad_value(key, it->second, "a number");
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, it->second, "a number");
    } catch (const std::out_of_range&) {
        bad_value(key, it->second, "a representable number");
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true/false");
}

std::vector<int> KvConfig::get_int_list(const std::string& key, std::vector<int> fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) bad_value(key, it->second, "a comma-separated integer list");
        out.push_back(std::stoi(tok));
    }
    if (out.empty()) bad_value(key, it->second, "a non-empty integer list");
    return out;
}

std::vector<std::uint64_t> KvConfig::get_u64_list(const std::string& key,
                                                  std::vector<std::uint64_t> fallback) const {
    read_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) bad_value(key, it->second, "a comma-separated list");
        out.push_back(std::stoull(tok));
    }
    if (out.empty()) bad_value(key, it->second, "a non-empty list");
    return out;
}

void KvConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::vector<std::string> KvConfig::unread_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (read_.count(k) == 0) out.push_back(k);
    }
    return out;
}

std::string KvConfig::serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
    return os.str();
}

namespace {

GapKind parse_gap_kind(const std::string& s) {
    if (s == "exponential") return GapKind::exponential;
    if (s == "gaussian") return GapKind::gaussian;
    if (s == "mixture") return GapKind::mixture;
    throw std::runtime_error("config: synth.gap.kind must be exponential/gaussian/mixture, got '" +
                             s + "'");
}

std::string gap_kind_name(GapKind k) {
    switch (k) {
        case GapKind::exponential: return "exponential";
        case GapKind::gaussian: return "gaussian";
        case GapKind::mixture: return "mixture";
    }
    return "?";
}

RepeatArm parse_arm(const std::string& s) {
    if (s == "none") return RepeatArm::none;
    if (s == "ode") return RepeatArm::ode;
    if (s == "exponential") return RepeatArm::exponential;
    if (s == "gaussian") return RepeatArm::gaussian;
    throw std::runtime_error("config: model.repeat must be none/ode/exponential/gaussian, got '" +
                             s + "'");
}

}  // namespace

RunConfig RunConfig::from(const KvConfig& kv) {
    RunConfig cfg;

    const std::string path = kv.get_string("data.path", "");
    if (!path.empty()) cfg.data_path = path;
    cfg.columns.user_col = static_cast<int>(kv.get_int("data.user_col", 0));
    cfg.columns.item_col = static_cast<int>(kv.get_int("data.item_col", 1));
    cfg.columns.time_col = static_cast<int>(kv.get_int("data.time_col", 2));
    cfg.columns.has_header = kv.get_bool("data.has_header", false);

    cfg.synth.num_users = static_cast<std::int32_t>(kv.get_int("synth.num_users", 500));
    cfg.synth.num_items = static_cast<std::int32_t>(kv.get_int("synth.num_items", 1000));
    cfg.synth.interactions_per_user =
        static_cast<std::int32_t>(kv.get_int("synth.interactions_per_user", 100));
    cfg.synth.repeat_prob = kv.get_double("synth.repeat_prob", 0.35);
    cfg.synth.gap.kind = parse_gap_kind(kv.get_string("synth.gap.kind", "exponential"));
    cfg.synth.gap.rate_per_day = kv.get_double("synth.gap.rate_per_day", 1.0 / 7.0);
    cfg.synth.gap.mu_days = kv.get_double("synth.gap.mu_days", 7.0);
    cfg.synth.gap.sigma_days = kv.get_double("synth.gap.sigma_days", 1.0);
    cfg.synth.gap.weight = kv.get_double("synth.gap.weight", 0.5);
    cfg.synth.popularity_exponent = kv.get_double("synth.popularity_exponent", 1.0);
    cfg.synth.rng_seed = kv.get_u64("synth.seed", 17);
    if (cfg.data_path.has_value()) {
        for (const char* key :
             {"synth.num_users", "synth.num_items", "synth.interactions_per_user",
              "synth.repeat_prob", "synth.gap.kind", "synth.gap.rate_per_day",
              "synth.gap.mu_days", "synth.gap.sigma_days", "synth.gap.weight",
              "synth.popularity_exponent", "synth.seed"}) {
            if (kv.has(key)) {
                throw std::runtime_error(
                    "config: both data.path and synthetic keys given; remove '" +
                    std::string(key) + "' or data.path");
            }
        }
    } else {
        cfg.synth.validate();
    }

    const std::string backbone = kv.get_string("model.backbone", "mf_dot");
    cfg.model.dim = static_cast<std::size_t>(kv.get_int("model.dim", 32));
    if (backbone == "mf_dot") {
        cfg.model.backbone = BackboneSpec::mf();
    } else if (backbone == "mlp_tower") {
        cfg.model.backbone = BackboneSpec::tower_default(cfg.model.dim);
    } else {
        throw std::runtime_error("config: model.backbone must be mf_dot/mlp_tower, got '" +
                                 backbone + "'");
    }
    cfg.model.arm = parse_arm(kv.get_string("model.repeat", "ode"));
    cfg.model.repeat.dim = cfg.model.dim;
    cfg.model.repeat.d_ode = static_cast<std::size_t>(kv.get_int("model.d_ode", 32));
    cfg.model.repeat.gaps.time_scale_days = kv.get_double("model.time_scale_days", 30.0);
    cfg.model.repeat.gaps.max_repeats =
        static_cast<std::size_t>(kv.get_int("model.max_repeats", 20));
    const std::string solver = kv.get_string("model.solver", "euler");
    if (solver == "euler") {
        cfg.model.repeat.solve.method = SolveMethod::euler;
    } else if (solver == "rk4") {
        cfg.model.repeat.solve.method = SolveMethod::rk4;
    } else {
        throw std::runtime_error("config: model.solver must be euler/rk4, got '" + solver + "'");
    }
    cfg.model.repeat.solve.substeps_per_interval =
        static_cast<int>(kv.get_int("model.substeps", 5));
    cfg.model.repeat.include_time = kv.get_bool("model.include_time", false);
    cfg.model.repeat.solve.validate();
    cfg.model.repeat.gaps.validate();

    cfg.train.batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", 512));
    cfg.train.learning_rate = kv.get_double("train.lr", 1e-3);
    cfg.train.weight_decay = kv.get_double("train.weight_decay", 1e-6);
    cfg.train.max_epochs = static_cast<int>(kv.get_int("train.max_epochs", 100));
    cfg.train.patience = static_cast<int>(kv.get_int("train.patience", 10));
    cfg.train.threads = static_cast<int>(kv.get_int("train.threads", 0));
    cfg.train.audit_gaps = kv.get_bool("train.audit_gaps", true);
    cfg.train.validate();

    cfg.eval_ks = kv.get_int_list("eval.ks", {50, 100});
    for (int k : cfg.eval_ks) {
        if (k < 1) throw std::runtime_error("config: eval.ks entries must be >= 1");
    }
    cfg.strata_buckets = static_cast<int>(kv.get_int("eval.strata", 0));
    cfg.eval_threads = static_cast<int>(kv.get_int("eval.threads", 0));

    cfg.seeds = kv.get_u64_list("run.seeds", {1, 2, 3, 4, 5});
    cfg.out_dir = kv.get_string("run.out", "out");

    const std::vector<std::string> unknown = kv.unread_keys();
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw std::runtime_error(msg);
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    return from(KvConfig::parse_file(path));
}

KvConfig RunConfig::resolved() const {
    KvConfig kv;
    if (data_path.has_value()) {
        kv.set("data.path", *data_path);
        kv.set("data.user_col", std::to_string(columns.user_col));
        kv.set("data.item_col", std::to_string(columns.item_col));
        kv.set("data.time_col", std::to_string(columns.time_col));
        kv.set("data.has_header", columns.has_header ? "true" : "false");
    } else {
        kv.set("synth.num_users", std::to_string(synth.num_users));
        kv.set("synth.num_items", std::to_string(synth.num_items));
        kv.set("synth.interactions_per_user", std::to_string(synth.interactions_per_user));
        char buf[64];
        auto fmt = [&buf](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        kv.set("synth.repeat_prob", fmt(synth.repeat_prob));
        kv.set("synth.gap.kind", gap_kind_name(synth.gap.kind));
        kv.set("synth.gap.rate_per_day", fmt(synth.gap.rate_per_day));
        kv.set("synth.gap.mu_days", fmt(synth.gap.mu_days));
        kv.set("synth.gap.sigma_days", fmt(synth.gap.sigma_days));
        kv.set("synth.gap.weight", fmt(synth.gap.weight));
        kv.set("synth.popularity_exponent", fmt(synth.popularity_exponent));
        kv.set("synth.seed", std::to_string(synth.rng_seed));
    }

    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    kv.set("model.backbone", to_string(model.backbone.kind));
    kv.set("model.dim", std::to_string(model.dim));
    kv.set("model.repeat", to_string(model.arm));
    kv.set("model.d_ode", std::to_string(model.repeat.d_ode));
    kv.set("model.time_scale_days", fmt(model.repeat.gaps.time_scale_days));
    kv.set("model.max_repeats", std::to_string(model.repeat.gaps.max_repeats));
    kv.set("model.solver", model.repeat.solve.method == SolveMethod::euler ? "euler" : "rk4");
    kv.set("model.substeps", std::to_string(model.repeat.solve.substeps_per_interval));
    kv.set("model.include_time", model.repeat.include_time ? "true" : "false");

    kv.set("train.batch_size", std::to_string(train.batch_size));
    kv.set("train.lr", fmt(train.learning_rate));
    kv.set("train.weight_decay", fmt(train.weight_decay));
    kv.set("train.max_epochs", std::to_string(train.max_epochs));
    kv.set("train.patience", std::to_string(train.patience));
    kv.set("train.threads", std::to_string(train.threads));
    kv.set("train.audit_gaps", train.audit_gaps ? "true" : "false");

    std::string ks;
    for (int k : eval_ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
    kv.set("eval.ks", ks);
    kv.set("eval.strata", std::to_string(strata_buckets));
    kv.set("eval.threads", std::to_string(eval_threads));

    std::string sl;
    for (std::uint64_t s : seeds) sl += (sl.empty() ? "" : ",") + std::to_string(s);
    kv.set("run.seeds", sl);
    kv.set("run.out", out_dir.string());
    return kv;
}

std::string RunConfig::dataset_name() const {
    if (data_path.has_value()) {
        return std::filesystem::path(*data_path).stem().string();
    }
    return "synthetic-s" + std::to_string(synth.rng_seed);
}

std::filesystem::path RunConfig::seed_dir(std::uint64_t seed) const {
    return arm_dir() / ("seed_" + std::to_string(seed));
}

double relative_improvement(double base, double value) {
    return base > 0.0 ? (value - base) / base : 0.0;
}

LoadedData load_dataset(const RunConfig& cfg) {
    LoadedData out;
    if (cfg.data_path.has_value()) {
        IngestResult ingested = ingest_tsv(*cfg.data_path, cfg.columns);
        if (ingested.duplicate_events > 0) {
            std::cerr << "note: kept " << ingested.duplicate_events
                      << " duplicate (user,item,timestamp) events\n";
        }
        out.log = std::move(ingested.log);
    } else {
        out.log = generate_synthetic(cfg.synth);
    }
    out.split = leave_one_out(build_histories(out.log));
    out.name = cfg.dataset_name();
    return out;
}

Model build_model_for(const RunConfig& cfg, const SplitDataset& split, std::uint64_t seed) {
    ModelSpec spec = cfg.model;
    if (spec.arm == RepeatArm::exponential || spec.arm == RepeatArm::gaussian) {
        const GapStats stats = compute_gap_stats(split, spec.repeat.gaps);
        spec.kernel_init_gap_mean = stats.mean;
        spec.kernel_init_gap_std = stats.stddev;
    }
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;
    for (const UserHistory& h : split.histories) {
        num_users = std::max(num_users, h.user + 1);
        for (const Event& ev : h.events) num_items = std::max(num_items, ev.item + 1);
    }
    return Model::build(spec, num_users, num_items, seed);
}

namespace {

void write_resolved(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << cfg.resolved().serialize();
}

struct ArmSummary {
    std::string arm;
    std::size_t seeds = 0;
    // K -> per-seed values
    std::map<int, std::vector<double>> recall;
    std::map<int, std::vector<double>> ndcg;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    if (cfg.data_path.has_value()) {
        throw std::runtime_error("synth: config specifies data.path; nothing to generate");
    }
    std::filesystem::create_directories(cfg.out_dir);
    const InteractionLog log = generate_synthetic(cfg.synth);
    const std::filesystem::path tsv = cfg.out_dir / "data.tsv";
    write_tsv(tsv, log);

    nlohmann::json stats;
    stats["num_users"] = log.num_users;
    stats["num_items"] = log.num_items;
    stats["num_interactions"] = log.interactions.size();
    stats["repeat_ratio"] = repeat_ratio(log);
    const std::filesystem::path stats_path = cfg.out_dir / "data.stats.json";
    std::ofstream os(stats_path);
    if (!os) throw std::runtime_error("synth: cannot write '" + stats_path.string() + "'");
    os << stats.dump(2) << "\n";

    write_resolved(cfg, cfg.out_dir / "synth.resolved.cfg");
    std::cout << "wrote " << tsv.string() << " (" << log.interactions.size()
              << " interactions, repeat ratio " << stats["repeat_ratio"] << ")\n";
}

void cmd_train(const RunConfig& cfg) {
    const LoadedData data = load_dataset(cfg);
    for (const std::uint64_t seed : cfg.seeds) {
        const std::filesystem::path dir = cfg.seed_dir(seed);
        std::filesystem::create_directories(dir);
        write_resolved(cfg, dir / "resolved.cfg");

        Model model = build_model_for(cfg, data.split, seed);
        TrainConfig tc = cfg.train;
        tc.rng_seed = seed;
        const TrainResult res = train(model, data.split, tc);
        model.store.save(dir / "checkpoint.bin");
        write_train_log_csv(dir / "log.csv", res.log, tc.eval_k);
        std::cout << cfg.arm_name() << " seed " << seed << ": " << res.log.size()
                  << " epochs, best val ndcg@" << tc.eval_k << " = " << res.best_val_ndcg
                  << " (epoch " << res.best_epoch << ")\n";
    }
}

namespace {

ArmSummary eval_arm(const RunConfig& cfg, const LoadedData& data, bool write_files) {
    ArmSummary summary;
    summary.arm = cfg.arm_name();
    EvalOptions opts;
    opts.ks = cfg.eval_ks;
    opts.strata_buckets = cfg.strata_buckets;
    opts.threads = cfg.eval_threads;
    opts.target = SplitTarget::test;

    for (const std::uint64_t seed : cfg.seeds) {
        const std::filesystem::path dir = cfg.seed_dir(seed);
        const std::filesystem::path ckpt = dir / "checkpoint.bin";
        if (!std::filesystem::exists(ckpt)) {
            throw std::runtime_error("eval: missing checkpoint '" + ckpt.string() + "'");
        }
        Model model = build_model_for(cfg, data.split, seed);
        model.store.load(ckpt);
        const EvalResult res = evaluate(model, data.split, opts);
        if (write_files) {
            write_metrics_csv(dir / "metrics.csv", summary.arm, data.name, seed, res);
            write_metrics_json(dir / "metrics.json", summary.arm, data.name, seed, res);
        }
        for (const auto& [k, v] : res.overall.recall) summary.recall[k].push_back(v);
        for (const auto& [k, v] : res.overall.ndcg) summary.ndcg[k].push_back(v);
        ++summary.seeds;
    }
    return summary;
}

void print_summary_table(const std::vector<ArmSummary>& arms, const std::vector<int>& ks) {
    std::printf("%-22s", "model");
    for (int k : ks) std::printf("  R@%-10d N@%-10d", k, k);
    std::printf("\n");
    for (const ArmSummary& a : arms) {
        std::printf("%-22s", a.arm.c_str());
        for (int k : ks) {
            std::printf("  %6.4f±%-6.4f", mean_of(a.recall.at(k)), sample_std(a.recall.at(k)));
            std::printf(" %6.4f±%-6.4f", mean_of(a.ndcg.at(k)), sample_std(a.ndcg.at(k)));
        }
        std::printf("\n");
    }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<ArmSummary>& arms,
                       const std::string& dataset, const std::vector<int>& ks) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os.precision(10);
    os << "model,dataset,seeds,K,recall_mean,recall_std,ndcg_mean,ndcg_std\n";
    for (const ArmSummary& a : arms) {
        // std is a sample statistic; with one seed the field stays empty
        auto std_field = [&a](const std::vector<double>& v) {
            return a.seeds < 2 ? std::string() : std::to_string(sample_std(v));
        };
        for (int k : ks) {
            os << a.arm << ',' << dataset << ',' << a.seeds << ',' << k << ','
               << mean_of(a.recall.at(k)) << ',' << std_field(a.recall.at(k)) << ','
               << mean_of(a.ndcg.at(k)) << ',' << std_field(a.ndcg.at(k)) << '\n';
        }
    }
}

}  // namespace

void cmd_eval(const RunConfig& cfg) {
    const LoadedData data = load_dataset(cfg);
    std::filesystem::create_directories(cfg.arm_dir());
    write_resolved(cfg, cfg.arm_dir() / "eval.resolved.cfg");
    const ArmSummary summary = eval_arm(cfg, data, /*write_files=*/true);
    print_summary_table({summary}, cfg.eval_ks);
    write_summary_csv(cfg.arm_dir() / "summary.csv", {summary}, data.name, cfg.eval_ks);
}

void cmd_compare(const RunConfig& cfg) {
    const LoadedData data = load_dataset(cfg);

    std::vector<RunConfig> arm_cfgs;
    for (const RepeatArm arm : {RepeatArm::none, RepeatArm::ode, RepeatArm::exponential}) {
        RunConfig c = cfg;
        c.model.arm = arm;
        arm_cfgs.push_back(std::move(c));
    }

    std::vector<std::string> missing;
    for (const RunConfig& c : arm_cfgs) {
        for (const std::uint64_t seed : c.seeds) {
            const std::filesystem::path ckpt = c.seed_dir(seed) / "checkpoint.bin";
            if (!std::filesystem::exists(ckpt)) missing.push_back(ckpt.string());
        }
    }
    if (!missing.empty()) {
        std::string msg = "compare: missing trained arms; run `recode train` for:";
        for (const std::string& m : missing) msg += "\n  " + m;
        throw std::runtime_error(msg);
    }

    std::vector<ArmSummary> summaries;
    for (const RunConfig& c : arm_cfgs) summaries.push_back(eval_arm(c, data, false));

    print_summary_table(summaries, cfg.eval_ks);
    const ArmSummary& base = summaries.front();
    std::printf("\nrelative improvement over %s:\n", base.arm.c_str());
    for (std::size_t a = 1; a < summaries.size(); ++a) {
        std::printf("%-22s", summaries[a].arm.c_str());
        for (int k : cfg.eval_ks) {
            const double r = relative_improvement(mean_of(base.recall.at(k)),
                                                  mean_of(summaries[a].recall.at(k)));
            std::printf("  R@%d %+6.2f%%", k, 100.0 * r);
        }
        std::printf("\n");
    }

    std::filesystem::create_directories(cfg.out_dir);
    write_summary_csv(cfg.out_dir / "compare.csv", summaries, data.name, cfg.eval_ks);

    nlohmann::json j;
    j["dataset"] = data.name;
    for (const ArmSummary& a : summaries) {
        nlohmann::json o;
        o["seeds"] = a.seeds;
        auto entry = [&a](const std::vector<double>& v) {
            nlohmann::json e{{"mean", mean_of(v)}};
            if (a.seeds >= 2) e["std"] = sample_std(v);
            return e;
        };
        for (const auto& [k, v] : a.recall) o["recall@" + std::to_string(k)] = entry(v);
        for (const auto& [k, v] : a.ndcg) o["ndcg@" + std::to_string(k)] = entry(v);
        j["arms"][a.arm] = o;
    }
    std::ofstream os(cfg.out_dir / "compare.json");
    os << j.dump(2) << "\n";

    if (cfg.strata_buckets > 0) {
        // Fig-3-style rows: one Recall@50 per (repeat-ratio bucket, arm)
        std::ofstream sos(cfg.out_dir / "compare_strata.csv");
        sos.precision(10);
        sos << "stratum,model,users,recall@" << cfg.eval_ks.front() << "\n";
        EvalOptions opts;
        opts.ks = {cfg.eval_ks.front()};
        opts.strata_buckets = cfg.strata_buckets;
        opts.threads = cfg.eval_threads;
        for (const RunConfig& c : arm_cfgs) {
            // mean over seeds per bucket
            std::map<std::string, std::pair<double, std::size_t>> acc;
            std::map<std::string, std::size_t> users;
            for (const std::uint64_t seed : c.seeds) {
                Model model = build_model_for(c, data.split, seed);
                model.store.load(c.seed_dir(seed) / "checkpoint.bin");
                const EvalResult res = evaluate(model, data.split, opts);
                for (const MetricSummary& s : res.strata) {
                    acc[s.stratum].first += s.recall.at(cfg.eval_ks.front());
                    acc[s.stratum].second += 1;
                    users[s.stratum] = s.users;
                }
            }
            for (const auto& [stratum, sum_count] : acc) {
                sos << stratum << ',' << c.arm_name() << ',' << users[stratum] << ','
                    << sum_count.first / static_cast<double>(sum_count.second) << '\n';
            }
        }
    }
}

int cmd_gradcheck() {
    int failures = 0;
    auto check = [&failures](const char* name, bool ok, const std::string& detail) {
        std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
        if (!ok) ++failures;
    };
    char buf[160];

    {
        MlpSpec spec;
        spec.input_width = 8;
        spec.layers = {{16, Activation::tanh}, {8, Activation::relu}, {1, Activation::sigmoid}};
        const double err = gradcheck_mlp(spec, 10, 1e-5, 20240601);
        std::snprintf(buf, sizeof buf, "max relative error %.3e (tolerance 1e-4)", err);
        check("mlp gradients vs central differences", err < 1e-4, buf);
    }
    {
        const ExpDecayField f{1.0};
        const std::vector<int> grid{16, 32, 64, 128, 256};
        const auto study = convergence_order(
            f.field(), [&](double t) { return f.solution(1.0, t); }, 1.0, 1.0,
            SolveMethod::euler, grid);
        const double order = study.order.value_or(-1.0);
        std::snprintf(buf, sizeof buf, "observed order %.3f (expect ~1)", order);
        check("euler convergence on exponential decay", order > 0.9 && order < 1.1, buf);
    }
    {
        const GaussianBumpField f{2.0, 1.0};
        const std::vector<int> grid{16, 32, 64, 128, 256};
        const auto study = convergence_order(
            f.field(), [&](double t) { return f.solution(1.0, t); }, 1.0, 1.0,
            SolveMethod::euler, grid);
        const double order = study.order.value_or(-1.0);
        std::snprintf(buf, sizeof buf, "observed order %.3f (expect ~1)", order);
        check("euler convergence on gaussian bump field", order > 0.9 && order < 1.1, buf);
    }
    {
        const ExpDecayField f{1.0};
        const std::vector<int> grid{2, 4, 8, 16};
        const auto study = convergence_order(
            f.field(), [&](double t) { return f.solution(1.0, t); }, 1.0, 1.0, SolveMethod::rk4,
            grid);
        const double order = study.order.value_or(-1.0);
        std::snprintf(buf, sizeof buf, "observed order %.3f (expect ~4)", order);
        check("rk4 convergence on exponential decay", order > 3.5 && order < 4.5, buf);
    }
    {
        // dh/dt = -h via a single identity layer with W = [[-1]]
        ParameterStore store;
        MlpSpec spec;
        spec.input_width = 1;
        spec.layers = {{1, Activation::identity}};
        MlpParams params = make_mlp_params(store, "f", spec, 1);
        store.find("f.w0")->value[0] = -1.0;
        OdeFunc f{spec, params, false};
        Graph g(store);
        const double times[1] = {1.0};
        const auto states =
            ode_solve(g, f, g.constant(Tensor::scalar(1.0)), times, {SolveMethod::euler, 10});
        const double got = g.value(states[0])[0];
        const double want = std::pow(0.9, 10);
        std::snprintf(buf, sizeof buf, "|%.15f - %.15f| = %.3e (tolerance 1e-12)", got, want,
                      std::abs(got - want));
        check("euler 10-step decay matches closed-form recurrence", std::abs(got - want) < 1e-12,
              buf);
    }
    {
        // gradients through the unrolled solve vs central differences
        ParameterStore store;
        MlpSpec spec;
        spec.input_width = 3;
        spec.layers = {{3, Activation::tanh}, {3, Activation::identity}};
        MlpParams params = make_mlp_params(store, "f", spec, 7);
        Parameter& h0 = store.create("h0", Tensor::vector({0.3, -0.2, 0.5}));
        OdeFunc f{spec, params, false};
        const std::vector<double> times{0.4, 1.0, 1.7};
        const SolveConfig cfg{SolveMethod::euler, 5};

        auto loss_value = [&]() -> double {
            Graph g(store);
            const auto states = ode_solve(g, f, g.param(h0), times, cfg);
            NodeId total = g.sum_all(states[0]);
            for (std::size_t i = 1; i < states.size(); ++i) {
                total = g.add(total, g.sum_all(states[i]));
            }
            return g.scalar_value(total);
        };

        Graph g(store);
        const auto states = ode_solve(g, f, g.param(h0), times, cfg);
        NodeId total = g.sum_all(states[0]);
        for (std::size_t i = 1; i < states.size(); ++i) {
            total = g.add(total, g.sum_all(states[i]));
        }
        GradientBuffer grads(store);
        g.backward(total, grads);

        double worst = 0.0;
        const double eps = 1e-5;
        for (std::size_t pi = 0; pi < store.size(); ++pi) {
            Parameter& p = store.at(pi);
            for (std::size_t c = 0; c < p.value.numel(); ++c) {
                const double orig = p.value[c];
                p.value[c] = orig + eps;
                const double lp = loss_value();
                p.value[c] = orig - eps;
                const double lm = loss_value();
                p.value[c] = orig;
                const double numeric = (lp - lm) / (2.0 * eps);
                const double analytic = grads.at(pi)[c];
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(analytic - numeric) / denom);
            }
        }
        std::snprintf(buf, sizeof buf, "max relative error %.3e (tolerance 1e-3)", worst);
        check("solver-path gradients vs central differences", worst < 1e-3, buf);
    }
    return failures;
}

}  // namespace recode
