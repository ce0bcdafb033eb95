#include "scfm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "scfm/errors.hpp"

namespace scfm {
namespace {

using nlohmann::json;

double get_real(const json& j, const std::string& key) {
    if (!j.is_number())
        throw ConfigError("config: key \"" + key + "\" must be a number");
    return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& key) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ConfigError("config: key \"" + key + "\" must be a non-negative integer");
    return j.get<std::size_t>();
}

std::string get_string(const json& j, const std::string& key) {
    if (!j.is_string())
        throw ConfigError("config: key \"" + key + "\" must be a string");
    return j.get<std::string>();
}

std::vector<std::size_t> get_widths(const json& j, const std::string& key) {
    if (!j.is_array())
        throw ConfigError("config: key \"" + key + "\" must be an array of widths");
    std::vector<std::size_t> out;
    for (const auto& e : j)
        out.push_back(get_count(e, key));
    return out;
}

} // namespace

TrainConfig config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config: top level must be a JSON object");

    TrainConfig cfg;
    static const std::set<std::string> known = {
        "beta",        "regularizer",   "sigma_x0",     "lr",
        "adam_beta1",  "adam_beta2",    "batch_size",   "steps",
        "ema_decay",   "n_mc_kl",       "seed",         "d_z",
        "d_eps",       "K",             "dataset_size", "trunk_hidden",
        "var_head_hidden", "decoder_hidden", "activation", "dataset",
        "gmm2d_k",     "gmm2d_separation"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key))
            throw ConfigError("config: unknown key \"" + key + "\"");
        if (key == "beta")
            cfg.beta = get_real(value, key);
        else if (key == "regularizer")
            cfg.regularizer = regularizer_from_string(get_string(value, key));
        else if (key == "sigma_x0")
            cfg.sigma_x0 = get_real(value, key);
        else if (key == "lr")
            cfg.lr = get_real(value, key);
        else if (key == "adam_beta1")
            cfg.adam_beta1 = get_real(value, key);
        else if (key == "adam_beta2")
            cfg.adam_beta2 = get_real(value, key);
        else if (key == "batch_size")
            cfg.batch_size = get_count(value, key);
        else if (key == "steps")
            cfg.steps = get_count(value, key);
        else if (key == "ema_decay")
            cfg.ema_decay = get_real(value, key);
        else if (key == "n_mc_kl")
            cfg.n_mc_kl = get_count(value, key);
        else if (key == "seed")
            cfg.seed = static_cast<std::uint64_t>(get_count(value, key));
        else if (key == "d_z")
            cfg.d_z = get_count(value, key);
        else if (key == "d_eps")
            cfg.d_eps = get_count(value, key);
        else if (key == "K")
            cfg.K = get_count(value, key);
        else if (key == "dataset_size")
            cfg.dataset_size = get_count(value, key);
        else if (key == "trunk_hidden")
            cfg.trunk_hidden = get_widths(value, key);
        else if (key == "var_head_hidden")
            cfg.var_head_hidden = get_widths(value, key);
        else if (key == "decoder_hidden")
            cfg.decoder_hidden = get_widths(value, key);
        else if (key == "activation")
            cfg.activation = get_string(value, key);
        else if (key == "dataset")
            cfg.dataset = get_string(value, key);
        else if (key == "gmm2d_k")
            cfg.gmm2d_k = get_count(value, key);
        else if (key == "gmm2d_separation")
            cfg.gmm2d_separation = get_real(value, key);
    }
    cfg.validate();
    return cfg;
}

TrainConfig config_load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("config_load: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

std::string config_to_json(const TrainConfig& cfg) {
    json j;
    j["K"] = cfg.K;
    j["activation"] = cfg.activation;
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["batch_size"] = cfg.batch_size;
    j["beta"] = cfg.beta;
    j["d_eps"] = cfg.d_eps;
    j["d_z"] = cfg.d_z;
    j["dataset"] = cfg.dataset;
    j["dataset_size"] = cfg.dataset_size;
    j["decoder_hidden"] = cfg.decoder_hidden;
    j["ema_decay"] = cfg.ema_decay;
    j["gmm2d_k"] = cfg.gmm2d_k;
    j["gmm2d_separation"] = cfg.gmm2d_separation;
    j["lr"] = cfg.lr;
    j["n_mc_kl"] = cfg.n_mc_kl;
    j["regularizer"] = to_string(cfg.regularizer);
    j["seed"] = cfg.seed;
    j["sigma_x0"] = cfg.sigma_x0;
    j["steps"] = cfg.steps;
    j["trunk_hidden"] = cfg.trunk_hidden;
    j["var_head_hidden"] = cfg.var_head_hidden;
    return j.dump(2);
}

} // namespace scfm
