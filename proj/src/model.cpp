#include "scfm/model.hpp"

#include <fstream>

#include "json.hpp"
#include "scfm/errors.hpp"
#include "scfm/stf.hpp"

namespace scfm {

ScfmModel ScfmModel::init(std::size_t d_z, std::size_t d_eps, std::size_t K, const Arch& arch,
                          Rng& rng) {
    ScfmModel m;
    m.recog = make_recognition_net(d_z, d_eps, arch.trunk_hidden, arch.var_head_hidden,
                                   arch.activation, rng);
    MlpSpec dec_spec;
    dec_spec.widths.push_back(d_z);
    dec_spec.widths.insert(dec_spec.widths.end(), arch.decoder_hidden.begin(),
                           arch.decoder_hidden.end());
    dec_spec.widths.push_back(d_z + d_eps);
    dec_spec.activation = arch.activation;
    dec_spec.final_layer_zero_init = true;
    m.decoder = Mlp::init(dec_spec, rng);
    m.prior = GmmPrior::init(K, d_z, rng);
    return m;
}

namespace {

void collect_mlp(const std::string& prefix, const Mlp& mlp,
                 std::vector<std::pair<std::string, Tensor>>& out) {
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        out.emplace_back(prefix + ".w" + std::to_string(l), mlp.weights[l]);
        out.emplace_back(prefix + ".b" + std::to_string(l), mlp.biases[l]);
    }
}

} // namespace

std::vector<std::pair<std::string, Tensor>> ScfmModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    collect_mlp("trunk", recog.trunk, out);
    collect_mlp("var_head", recog.var_head, out);
    collect_mlp("decoder", decoder, out);
    out.emplace_back("prior.logits", prior.logits);
    out.emplace_back("prior.means", prior.means);
    out.emplace_back("prior.log_scales", prior.log_scales);
    return out;
}

std::vector<Tensor> ScfmModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters())
        out.push_back(t);
    return out;
}

std::size_t ScfmModel::param_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters())
        n += t.size();
    return n;
}

std::vector<Tensor> ScfmModel::cloned_parameters() const {
    std::vector<Tensor> out;
    for (const Tensor& t : parameters())
        out.push_back(t.clone());
    return out;
}

void ScfmModel::load_parameter_values(const std::vector<Tensor>& values) {
    std::vector<Tensor> params = parameters();
    if (values.size() != params.size())
        throw ShapeError("load_parameter_values: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (values[i].shape() != params[i].shape())
            throw ShapeError("load_parameter_values: shape mismatch at index " +
                             std::to_string(i));
        params[i].values_mut() = values[i].values();
    }
}

namespace {

std::vector<std::size_t> hidden_of(const MlpSpec& spec) {
    return {spec.widths.begin() + 1, spec.widths.end() - 1};
}

} // namespace

ScfmModel::Arch ScfmModel::arch() const {
    Arch a;
    a.trunk_hidden = hidden_of(recog.trunk.spec);
    a.var_head_hidden = hidden_of(recog.var_head.spec);
    a.decoder_hidden = hidden_of(decoder.spec);
    a.activation = recog.trunk.spec.activation;
    return a;
}

void save_checkpoint(const std::filesystem::path& dir, const ScfmModel& model) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("save_checkpoint: cannot create " + dir.string());

    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, t] : model.named_parameters()) {
        const std::string file = name + ".stf";
        stf_write(dir / file, t);
        tensors[name] = file;
    }

    const ScfmModel::Arch arch = model.arch();
    nlohmann::json manifest = {
        {"tensors", tensors},
        {"dims",
         {{"d_z", model.d_z()},
          {"d_eps", model.d_eps()},
          {"D", model.data_dim()},
          {"K", model.K()}}},
        {"format_version", 1},
        {"arch",
         {{"trunk_hidden", arch.trunk_hidden},
          {"var_head_hidden", arch.var_head_hidden},
          {"decoder_hidden", arch.decoder_hidden},
          {"activation", to_string(arch.activation)}}},
    };

    const std::filesystem::path tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw IoError("save_checkpoint: cannot open manifest");
        out << manifest.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, dir / "manifest.json", ec);
    if (ec)
        throw IoError("save_checkpoint: manifest rename failed");
}

ScfmModel load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in)
        throw IoError("load_checkpoint: cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_checkpoint: bad manifest: ") + e.what());
    }
    if (!manifest.contains("format_version") || manifest["format_version"] != 1)
        throw FormatError("load_checkpoint: unsupported format_version");

    const auto& dims = manifest.at("dims");
    const auto d_z = dims.at("d_z").get<std::size_t>();
    const auto d_eps = dims.at("d_eps").get<std::size_t>();
    const auto K = dims.at("K").get<std::size_t>();
    if (dims.at("D").get<std::size_t>() != d_z + d_eps)
        throw FormatError("load_checkpoint: dims violate d_z + d_eps == D");

    ScfmModel::Arch arch;
    const auto& aj = manifest.at("arch");
    arch.trunk_hidden = aj.at("trunk_hidden").get<std::vector<std::size_t>>();
    arch.var_head_hidden = aj.at("var_head_hidden").get<std::vector<std::size_t>>();
    arch.decoder_hidden = aj.at("decoder_hidden").get<std::vector<std::size_t>>();
    arch.activation = activation_from_string(aj.at("activation").get<std::string>());

    Rng scratch(0); // overwritten below
    ScfmModel model = ScfmModel::init(d_z, d_eps, K, arch, scratch);

    const auto& tensors = manifest.at("tensors");
    for (auto&& [name, t] : model.named_parameters()) {
        if (!tensors.contains(name))
            throw FormatError("load_checkpoint: manifest missing tensor \"" + name + "\"");
        Tensor loaded = stf_read(dir / tensors.at(name).get<std::string>());
        if (loaded.shape() != t.shape())
            throw FormatError("load_checkpoint: shape mismatch for \"" + name + "\"");
        t.values_mut() = loaded.values();
    }
    return model;
}

} // namespace scfm
