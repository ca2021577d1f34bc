#include "doctest.h"

#include "mrtcn/mrtcn.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    mrtcn_string_free(s);
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mrtcn_test_capi_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const auto log = std::filesystem::temp_directory_path() / "mrtcn_test_capi_cli.txt";
    const std::string cmd = std::string(MRTCN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    if (output) {
        *output = slurp(log);
    }
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

mrtcn_config* tiny_config() {
    mrtcn_config* cfg = nullptr;
    REQUIRE(mrtcn_config_parse(R"({"synth": {"duration_sec": 600, "events_per_class": 30},
                                   "network": {"hidden_channels": 4},
                                   "train": {"iterations": 5, "batch_size": 4}})",
                               &cfg) == MRTCN_OK);
    return cfg;
}

}  // namespace

TEST_CASE("config handles and error reporting") {
    mrtcn_config* cfg = nullptr;
    REQUIRE(mrtcn_config_default(&cfg) == MRTCN_OK);
    CHECK(mrtcn_config_set(cfg, "train.iterations", "12") == MRTCN_OK);
    CHECK(mrtcn_config_set(cfg, "train.nonsense", "1") == MRTCN_ERR_CONFIG);
    CHECK(std::string(mrtcn_last_error()).find("train.nonsense") != std::string::npos);
    char* json = nullptr;
    REQUIRE(mrtcn_config_dump(cfg, &json) == MRTCN_OK);
    const std::string text = take(json);
    CHECK(text.find("\"iterations\": 12") != std::string::npos);

    mrtcn_config* again = nullptr;
    REQUIRE(mrtcn_config_parse(text.c_str(), &again) == MRTCN_OK);
    REQUIRE(mrtcn_config_dump(again, &json) == MRTCN_OK);
    CHECK(take(json) == text);
    mrtcn_config_free(again);

    CHECK(mrtcn_config_parse("{\"synth\": {\"splits\": [1, 1, 1]}}", &again) == MRTCN_ERR_CONFIG);
    CHECK(mrtcn_config_load("/nonexistent/config.json", &again) == MRTCN_ERR_IO);
    CHECK(mrtcn_config_set(nullptr, "seed", "1") == MRTCN_ERR_INVALID_ARGUMENT);
    CHECK(std::string(mrtcn_status_name(MRTCN_ERR_NUMERIC)) == "numeric error");
    mrtcn_config_free(cfg);
}

TEST_CASE("pipeline through the C API") {
    mrtcn_config* cfg = tiny_config();
    const auto data = scratch("data");
    const auto run = scratch("run");
    int lines = 0;
    mrtcn_set_log_callback([](const char*, void* user) { ++*static_cast<int*>(user); }, &lines);
    CHECK(mrtcn_train(cfg, data.c_str(), run.c_str(), nullptr, nullptr) == MRTCN_ERR_IO);
    REQUIRE(mrtcn_synth(cfg, data.c_str(), nullptr) == MRTCN_OK);
    CHECK(mrtcn_config_set(cfg, "train.eval_every", "5") == MRTCN_OK);
    char* summary = nullptr;
    REQUIRE(mrtcn_train(cfg, data.c_str(), run.c_str(), nullptr, &summary) == MRTCN_OK);
    CHECK(take(summary).find("iterations 1..5") != std::string::npos);
    CHECK(lines == 1);
    mrtcn_set_log_callback(nullptr, nullptr);

    const std::string ckpt = (run / "checkpoint.ttck").string();
    REQUIRE(mrtcn_eval(cfg, ckpt.c_str(), data.c_str(), run.c_str(), &summary) == MRTCN_OK);
    CHECK(take(summary) == slurp(run / "eval.csv"));
    CHECK(mrtcn_spot(cfg, ckpt.c_str(), data.c_str(), run.c_str(), nullptr) == MRTCN_ERR_CONFIG);

    mrtcn_model* model = nullptr;
    REQUIRE(mrtcn_model_load(ckpt.c_str(), &model) == MRTCN_OK);
    CHECK(mrtcn_model_num_classes(model) == 4);
    CHECK(mrtcn_model_window_len(model) == 30);
    CHECK(mrtcn_model_iteration(model) == 5);
    char* spec = nullptr;
    REQUIRE(mrtcn_model_spec(model, &spec) == MRTCN_OK);
    CHECK(take(spec).find("hidden=4") != std::string::npos);
    char* csv = nullptr;
    REQUIRE(mrtcn_model_predict(model, (data / "test.fseq").c_str(), &csv) == MRTCN_OK);
    const std::string curve = take(csv);
    CHECK(curve.rfind("second,background,class1,class2,class3\n0,", 0) == 0);
    mrtcn_model_free(model);

    CHECK(mrtcn_model_load((data / "test.jsonl").c_str(), &model) == MRTCN_ERR_FORMAT);
    mrtcn_config_free(cfg);
}

TEST_CASE("rf and gradcheck through the C API") {
    mrtcn_config* cfg = nullptr;
    REQUIRE(mrtcn_config_default(&cfg) == MRTCN_OK);
    char* table = nullptr;
    REQUIRE(mrtcn_rf(cfg, 0, &table) == MRTCN_OK);
    CHECK(take(table).find(",27,") != std::string::npos);
    mrtcn_config_free(cfg);
}

TEST_CASE("cli exit codes and help") {
    std::string out;
    CHECK(run_cli("--help", &out) == 0);
    for (const char* key : {"seed", "synth.splits", "network.towers", "sampler.p0", "train.class_weights",
                            "eval.postprocess", "spot.delta_grid", "ablate.arms"}) {
        CHECK_MESSAGE(out.find(key) != std::string::npos, key);
    }
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("train --no-such-flag") == 1);
    CHECK(run_cli("rf --set train.iteratons=5", &out) == 1);
    CHECK(out.find("train.iteratons") != std::string::npos);
    CHECK(run_cli("rf --set network.window_len=5", &out) == 1);
    CHECK(run_cli("train --data /nonexistent/dir --out " + scratch("cli_out").string()) == 2);
    CHECK(run_cli("rf --first-block", &out) == 0);
    CHECK(out.find("t2,\"6\",5,5,0,yes") != std::string::npos);
    const auto bad = scratch("bad_config");
    std::filesystem::create_directories(bad);
    std::ofstream(bad / "c.json") << R"({"train": {"lr": -1}})";
    CHECK(run_cli("synth --config " + (bad / "c.json").string() + " --out " + bad.string()) == 1);
}
