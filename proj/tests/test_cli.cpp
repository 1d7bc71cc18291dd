#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "recode/runner.hpp"

using namespace recode;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

RunConfig tiny_run(const fs::path& out) {
    KvConfig kv = KvConfig::parse_string(
        "synth.num_users=12\n"
        "synth.num_items=40\n"
        "synth.interactions_per_user=10\n"
        "synth.repeat_prob=0.4\n"
        "synth.seed=5\n"
        "model.dim=4\n"
        "model.d_ode=4\n"
        "train.batch_size=32\n"
        "train.max_epochs=1\n"
        "run.seeds=1,2\n");
    RunConfig cfg = RunConfig::from(kv);
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config parsing: types, comments, and errors") {
    const KvConfig kv = KvConfig::parse_string(
        "# a comment\n"
        "train.batch_size = 64   # inline comment\n"
        "train.lr=5e-4\n"
        "eval.ks=10,50\n"
        "model.include_time=true\n");
    CHECK(kv.get_int("train.batch_size", 0) == 64);
    CHECK(kv.get_double("train.lr", 0.0) == 5e-4);
    CHECK(kv.get_int_list("eval.ks", {}) == std::vector<int>{10, 50});
    CHECK(kv.get_bool("model.include_time", false) == true);
    CHECK(kv.get_int("missing.key", 7) == 7);

    CHECK_THROWS_WITH_AS(KvConfig::parse_string("no_equals_sign\n"),
                         doctest::Contains("key=value"), std::runtime_error);
    CHECK_THROWS_WITH_AS(KvConfig::parse_string("a.b=1\na.b=2\n"),
                         doctest::Contains("duplicate"), std::runtime_error);
    const KvConfig bad = KvConfig::parse_string("train.lr=abc\n");
    CHECK_THROWS_WITH_AS(bad.get_double("train.lr", 0.0), doctest::Contains("train.lr"),
                         std::runtime_error);
}

TEST_CASE("unknown keys are rejected with their names") {
    const KvConfig kv = KvConfig::parse_string("train.batchsize=64\n");
    CHECK_THROWS_WITH_AS(RunConfig::from(kv), doctest::Contains("train.batchsize"),
                         std::runtime_error);
}

TEST_CASE("defaults follow the documented protocol") {
    const RunConfig cfg = RunConfig::from(KvConfig::parse_string(""));
    CHECK(cfg.model.dim == 32);
    CHECK(cfg.train.batch_size == 512);
    CHECK(cfg.train.learning_rate == 1e-3);
    CHECK(cfg.train.weight_decay == 1e-6);
    CHECK(cfg.train.patience == 10);
    CHECK(cfg.model.repeat.gaps.max_repeats == 20);
    CHECK(cfg.model.repeat.solve.method == SolveMethod::euler);
    CHECK(cfg.model.repeat.solve.substeps_per_interval == 5);
    CHECK(cfg.eval_ks == std::vector<int>{50, 100});
    CHECK(cfg.seeds.size() == 5);
}

TEST_CASE("resolved configs round-trip to themselves") {
    RunConfig cfg = tiny_run("somewhere");
    const std::string once = cfg.resolved().serialize();
    const RunConfig reparsed = RunConfig::from(KvConfig::parse_string(once));
    CHECK(reparsed.resolved().serialize() == once);
}

TEST_CASE("invalid learning rates fail config validation") {
    CHECK_THROWS_AS(RunConfig::from(KvConfig::parse_string("train.lr=0\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from(KvConfig::parse_string("train.lr=-1e-3\n")),
                    std::invalid_argument);
}

TEST_CASE("data path and synthetic recipe are mutually exclusive") {
    CHECK_THROWS_WITH_AS(
        RunConfig::from(KvConfig::parse_string("data.path=x.tsv\nsynth.num_users=5\n")),
        doctest::Contains("synth.num_users"), std::runtime_error);
}

TEST_CASE("synth writes the dataset, stats sidecar, and resolved config") {
    TempDir tmp("recode_cli_synth");
    RunConfig cfg = tiny_run(tmp.path);
    cfg.synth.num_users = 50;
    cfg.synth.num_items = 300;
    cfg.synth.interactions_per_user = 100;
    cfg.synth.repeat_prob = 0.35;
    cmd_synth(cfg);

    CHECK(fs::exists(tmp.path / "data.tsv"));
    CHECK(fs::exists(tmp.path / "synth.resolved.cfg"));
    const std::string stats = file_bytes(tmp.path / "data.stats.json");
    CHECK(stats.find("repeat_ratio") != std::string::npos);

    // the realized ratio lands in the configured band
    const IngestResult r = ingest_tsv(tmp.path / "data.tsv");
    const double ratio = repeat_ratio(r.log);
    CHECK(ratio > 0.30);
    CHECK(ratio < 0.40);

    // same seed, byte-identical regeneration
    const std::string first = file_bytes(tmp.path / "data.tsv");
    cmd_synth(cfg);
    CHECK(file_bytes(tmp.path / "data.tsv") == first);
}

TEST_CASE("train writes per-seed artifacts; eval aggregates them") {
    TempDir tmp("recode_cli_train");
    RunConfig cfg = tiny_run(tmp.path);
    cmd_train(cfg);
    for (const char* seed : {"seed_1", "seed_2"}) {
        CHECK(fs::exists(cfg.arm_dir() / seed / "checkpoint.bin"));
        CHECK(fs::exists(cfg.arm_dir() / seed / "log.csv"));
        CHECK(fs::exists(cfg.arm_dir() / seed / "resolved.cfg"));
    }

    cmd_eval(cfg);
    CHECK(fs::exists(cfg.arm_dir() / "summary.csv"));
    CHECK(fs::exists(cfg.arm_dir() / "seed_1" / "metrics.json"));
    CHECK(fs::exists(cfg.arm_dir() / "seed_1" / "metrics.csv"));
}

TEST_CASE("eval without checkpoints names the missing file") {
    TempDir tmp("recode_cli_nockpt");
    RunConfig cfg = tiny_run(tmp.path);
    CHECK_THROWS_WITH_AS(cmd_eval(cfg), doctest::Contains("checkpoint"), std::runtime_error);
}

TEST_CASE("single-seed summaries omit the std field") {
    TempDir tmp("recode_cli_oneseed");
    RunConfig cfg = tiny_run(tmp.path);
    cfg.seeds = {1};
    cmd_train(cfg);
    cmd_eval(cfg);
    std::ifstream is(cfg.arm_dir() / "summary.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    // model,dataset,seeds,K,recall_mean,recall_std,ndcg_mean,ndcg_std
    CHECK(row.find(",,") != std::string::npos);
}

TEST_CASE("compare requires every arm and lists what is missing") {
    TempDir tmp("recode_cli_missingarm");
    RunConfig cfg = tiny_run(tmp.path);
    cmd_train(cfg);  // only the ode arm
    try {
        cmd_compare(cfg);
        FAIL("compare should have thrown");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mf_dot/seed_1") != std::string::npos);
        CHECK(msg.find("mf_dot+exp_kernel/seed_1") != std::string::npos);
    }
}

TEST_CASE("compare reports all three arms against the backbone") {
    TempDir tmp("recode_cli_compare");
    RunConfig base = tiny_run(tmp.path);
    base.seeds = {1};
    for (const RepeatArm arm : {RepeatArm::none, RepeatArm::ode, RepeatArm::exponential}) {
        RunConfig c = base;
        c.model.arm = arm;
        cmd_train(c);
    }
    RunConfig c = base;
    c.strata_buckets = 2;
    cmd_compare(c);
    CHECK(fs::exists(tmp.path / "compare.csv"));
    CHECK(fs::exists(tmp.path / "compare.json"));
    CHECK(fs::exists(tmp.path / "compare_strata.csv"));

    const std::string csv = file_bytes(tmp.path / "compare.csv");
    CHECK(csv.find("mf_dot") != std::string::npos);
    CHECK(csv.find("mf_dot+recode") != std::string::npos);
    CHECK(csv.find("mf_dot+exp_kernel") != std::string::npos);
}

TEST_CASE("identical metrics mean zero relative improvement") {
    CHECK(relative_improvement(0.25, 0.25) == 0.0);
    CHECK(relative_improvement(0.0, 0.5) == 0.0);  // undefined base reports zero
    CHECK(relative_improvement(0.2, 0.3) == doctest::Approx(0.5));
}

TEST_SUITE_END();
