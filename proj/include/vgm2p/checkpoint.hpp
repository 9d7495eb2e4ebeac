#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgm2p/mlp.hpp"

namespace vgm2p {

// Checkpoint files carry one or more named nets: a text header describing
// layer shapes, activations, seeds, free-form key=value metadata and an
// optional embedding table per net, followed by the raw parameter blocks as
// row-major little-endian 64-bit floats in layer order (then the embedding
// block, when present).

struct CheckpointNetView {
    std::string name;
    const MlpParams* net = nullptr;
    const Tensor* embedding = nullptr;  // optional
    std::map<std::string, std::string> meta;
};

struct LoadedNet {
    std::string name;
    MlpParams net;
    Tensor embedding;  // empty when absent
    bool has_embedding = false;
    std::map<std::string, std::string> meta;
};

struct LoadedCheckpoint {
    std::uint64_t config_hash = 0;
    std::vector<LoadedNet> nets;

    const LoadedNet& find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::vector<CheckpointNetView>& nets,
                     std::uint64_t config_hash);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace vgm2p
