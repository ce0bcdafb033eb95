#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scfm/gmm.hpp"
#include "scfm/nets.hpp"

namespace scfm {

// The three learnable pieces of SCFM: shared recognition network (with its
// endpoint variance head), decoder, and GMM prior, plus dimension metadata.
struct ScfmModel {
    RecognitionNet recog;
    Mlp decoder;
    GmmPrior prior;

    struct Arch {
        std::vector<std::size_t> trunk_hidden{64, 64};
        std::vector<std::size_t> var_head_hidden{32};
        std::vector<std::size_t> decoder_hidden{64, 64};
        Activation activation = Activation::Tanh;
    };

    static ScfmModel init(std::size_t d_z, std::size_t d_eps, std::size_t K, const Arch& arch,
                          Rng& rng);

    std::size_t d_z() const { return recog.d_z; }
    std::size_t d_eps() const { return recog.d_eps; }
    std::size_t data_dim() const { return recog.data_dim(); }
    std::size_t K() const { return prior.K; }

    // Stable iteration order; tensors share buffers with the model, so
    // in-place updates through the returned handles mutate the model.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::size_t param_count() const;

    // Deep copies of all parameters (EMA shadows, snapshots).
    std::vector<Tensor> cloned_parameters() const;
    // Overwrites parameter values from a parallel list (shapes must match).
    void load_parameter_values(const std::vector<Tensor>& values);

    Arch arch() const;
};

// Checkpoint: a directory of STF tensors plus manifest.json
//   {"tensors": {name: filename}, "dims": {"d_z", "d_eps", "D", "K"},
//    "format_version": 1, "arch": {...}}
void save_checkpoint(const std::filesystem::path& dir, const ScfmModel& model);
ScfmModel load_checkpoint(const std::filesystem::path& dir);

} // namespace scfm
