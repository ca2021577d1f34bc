#include "mrtcn/mrtcn.h"

#include "mrtcn/commands.hpp"
#include "mrtcn/error.hpp"
#include "mrtcn/train.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

struct mrtcn_config {
    mrtcn::RunConfig value;
};

struct mrtcn_model {
    mrtcn::Network net;
    std::uint64_t iteration = 0;
};

namespace {

thread_local std::string g_last_error;
mrtcn_log_fn g_log = nullptr;
void* g_log_user = nullptr;

mrtcn_status status_of(mrtcn::ErrorKind kind) {
    switch (kind) {
        case mrtcn::ErrorKind::InvalidArgument: return MRTCN_ERR_INVALID_ARGUMENT;
        case mrtcn::ErrorKind::Config: return MRTCN_ERR_CONFIG;
        case mrtcn::ErrorKind::Io: return MRTCN_ERR_IO;
        case mrtcn::ErrorKind::Format: return MRTCN_ERR_FORMAT;
        case mrtcn::ErrorKind::Numeric: return MRTCN_ERR_NUMERIC;
    }
    return MRTCN_ERR_INTERNAL;
}

template <typename F>
mrtcn_status guarded(F&& body) {
    try {
        g_last_error.clear();
        return body();
    } catch (const mrtcn::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return MRTCN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MRTCN_ERR_INTERNAL;
    }
}

mrtcn_status null_argument(const char* name) {
    g_last_error = std::string(name) + " is null";
    return MRTCN_ERR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const std::string& s) {
    if (out != nullptr) {
        *out = copy_string(s);
    }
}

mrtcn::LogSink log_sink() {
    if (g_log == nullptr) {
        return {};
    }
    return [](const std::string& line) { g_log(line.c_str(), g_log_user); };
}

}  // namespace

extern "C" {

const char* mrtcn_version(void) { return "0.1.0"; }

const char* mrtcn_last_error(void) { return g_last_error.c_str(); }

const char* mrtcn_status_name(mrtcn_status status) {
    switch (status) {
        case MRTCN_OK: return "ok";
        case MRTCN_ERR_INVALID_ARGUMENT: return "invalid argument";
        case MRTCN_ERR_CONFIG: return "config error";
        case MRTCN_ERR_IO: return "i/o error";
        case MRTCN_ERR_FORMAT: return "format error";
        case MRTCN_ERR_NUMERIC: return "numeric error";
        case MRTCN_ERR_CHECK_FAILED: return "check failed";
        case MRTCN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void mrtcn_string_free(char* s) { std::free(s); }

void mrtcn_set_log_callback(mrtcn_log_fn fn, void* user) {
    g_log = fn;
    g_log_user = user;
}

mrtcn_status mrtcn_config_default(mrtcn_config** out) {
    if (out == nullptr) {
        return null_argument("out");
    }
    return guarded([&] {
        *out = new mrtcn_config{};
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_load(const char* path, mrtcn_config** out) {
    if (path == nullptr || out == nullptr) {
        return null_argument(path == nullptr ? "path" : "out");
    }
    return guarded([&] {
        *out = new mrtcn_config{mrtcn::load_config(path)};
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_parse(const char* json, mrtcn_config** out) {
    if (json == nullptr || out == nullptr) {
        return null_argument(json == nullptr ? "json" : "out");
    }
    return guarded([&] {
        *out = new mrtcn_config{mrtcn::parse_config(json)};
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_set(mrtcn_config* cfg, const char* key, const char* json_value) {
    if (cfg == nullptr || key == nullptr || json_value == nullptr) {
        return null_argument(cfg == nullptr ? "cfg" : key == nullptr ? "key" : "json_value");
    }
    return guarded([&] {
        mrtcn::set_config_value(cfg->value, key, json_value);
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_validate(const mrtcn_config* cfg) {
    if (cfg == nullptr) {
        return null_argument("cfg");
    }
    return guarded([&] {
        cfg->value.validate();
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_dump(const mrtcn_config* cfg, char** json_out) {
    if (cfg == nullptr || json_out == nullptr) {
        return null_argument(cfg == nullptr ? "cfg" : "json_out");
    }
    return guarded([&] {
        *json_out = copy_string(mrtcn::dump_config(cfg->value));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_config_reference(char** text_out) {
    if (text_out == nullptr) {
        return null_argument("text_out");
    }
    return guarded([&] {
        *text_out = copy_string(mrtcn::config_reference());
        return MRTCN_OK;
    });
}

void mrtcn_config_free(mrtcn_config* cfg) { delete cfg; }

mrtcn_status mrtcn_synth(const mrtcn_config* cfg, const char* out_dir, char** summary_out) {
    if (cfg == nullptr || out_dir == nullptr) {
        return null_argument(cfg == nullptr ? "cfg" : "out_dir");
    }
    return guarded([&] {
        emit(summary_out, mrtcn::cmd_synth(cfg->value, out_dir));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_train(const mrtcn_config* cfg, const char* data_dir, const char* out_dir,
                         const char* resume_checkpoint, char** summary_out) {
    if (cfg == nullptr || data_dir == nullptr || out_dir == nullptr) {
        return null_argument(cfg == nullptr ? "cfg" : data_dir == nullptr ? "data_dir" : "out_dir");
    }
    return guarded([&] {
        const std::filesystem::path resume = resume_checkpoint ? resume_checkpoint : "";
        emit(summary_out, mrtcn::cmd_train(cfg->value, data_dir, out_dir, resume, log_sink()));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_eval(const mrtcn_config* cfg, const char* checkpoint, const char* data_dir, const char* out_dir,
                        char** summary_out) {
    if (cfg == nullptr || checkpoint == nullptr || data_dir == nullptr || out_dir == nullptr) {
        return null_argument("cfg, checkpoint, data_dir or out_dir");
    }
    return guarded([&] {
        emit(summary_out, mrtcn::cmd_eval(cfg->value, checkpoint, data_dir, out_dir));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_spot(const mrtcn_config* cfg, const char* checkpoint, const char* data_dir, const char* out_dir,
                        char** summary_out) {
    if (cfg == nullptr || checkpoint == nullptr || data_dir == nullptr || out_dir == nullptr) {
        return null_argument("cfg, checkpoint, data_dir or out_dir");
    }
    return guarded([&] {
        emit(summary_out, mrtcn::cmd_spot(cfg->value, checkpoint, data_dir, out_dir));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_ablate(const mrtcn_config* cfg, const char* data_dir, const char* out_dir, char** summary_out) {
    if (cfg == nullptr || data_dir == nullptr || out_dir == nullptr) {
        return null_argument(cfg == nullptr ? "cfg" : data_dir == nullptr ? "data_dir" : "out_dir");
    }
    return guarded([&] {
        emit(summary_out, mrtcn::cmd_ablate(cfg->value, data_dir, out_dir, log_sink()));
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_rf(const mrtcn_config* cfg, int first_block_only, char** table_out) {
    if (cfg == nullptr) {
        return null_argument("cfg");
    }
    return guarded([&] {
        const mrtcn::RfReport r = mrtcn::cmd_rf(cfg->value, first_block_only != 0);
        emit(table_out, r.table);
        if (!r.agree) {
            g_last_error = "analytic receptive field disagrees with the perturbation probe";
            return MRTCN_ERR_CHECK_FAILED;
        }
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_gradcheck(uint64_t seed, char** table_out) {
    return guarded([&] {
        const mrtcn::GradcheckReport r = mrtcn::cmd_gradcheck(seed);
        emit(table_out, r.table);
        if (!r.passed) {
            g_last_error = "gradient check failed";
            return MRTCN_ERR_CHECK_FAILED;
        }
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_model_load(const char* checkpoint, mrtcn_model** out) {
    if (checkpoint == nullptr || out == nullptr) {
        return null_argument(checkpoint == nullptr ? "checkpoint" : "out");
    }
    return guarded([&] {
        mrtcn::Checkpoint ckpt = mrtcn::load_checkpoint(checkpoint);
        *out = new mrtcn_model{mrtcn::Network(std::move(ckpt.spec), std::move(ckpt.params)), ckpt.iteration};
        return MRTCN_OK;
    });
}

size_t mrtcn_model_num_classes(const mrtcn_model* model) { return model ? model->net.spec().num_classes : 0; }

size_t mrtcn_model_window_len(const mrtcn_model* model) { return model ? model->net.spec().input_len : 0; }

uint64_t mrtcn_model_iteration(const mrtcn_model* model) { return model ? model->iteration : 0; }

mrtcn_status mrtcn_model_spec(const mrtcn_model* model, char** canonical_out) {
    if (model == nullptr || canonical_out == nullptr) {
        return null_argument(model == nullptr ? "model" : "canonical_out");
    }
    return guarded([&] {
        *canonical_out = copy_string(model->net.spec().canonical());
        return MRTCN_OK;
    });
}

mrtcn_status mrtcn_model_predict(mrtcn_model* model, const char* features_path, char** csv_out) {
    if (model == nullptr || features_path == nullptr || csv_out == nullptr) {
        return null_argument(model == nullptr ? "model" : features_path == nullptr ? "features_path" : "csv_out");
    }
    return guarded([&] {
        const mrtcn::FeatureSequence seq = mrtcn::load_features(features_path);
        const mrtcn::ProbabilityCurve curve = mrtcn::sliding_window_predict(model->net, seq);
        std::vector<std::string> names;
        for (std::size_t c = 0; c < curve.classes; ++c) {
            names.push_back(c == 0 ? "background" : "class" + std::to_string(c));
        }
        *csv_out = copy_string(curve.to_csv(names));
        return MRTCN_OK;
    });
}

void mrtcn_model_free(mrtcn_model* model) { delete model; }

}  // extern "C"
