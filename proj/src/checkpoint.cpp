#include "vgm2p/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace vgm2p {

namespace {

constexpr const char* kMagic = "vgm2p-ckpt v1";

void write_block(std::ostream& out, const Tensor& t) {
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void read_block(std::istream& in, Tensor& t) {
    for (double& v : t.data) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        std::memcpy(&v, &bits, sizeof(v));
    }
}

}  // namespace

const LoadedNet& LoadedCheckpoint::find(const std::string& name) const {
    for (const auto& n : nets)
        if (n.name == name) return n;
    throw std::runtime_error("checkpoint: net '" + name + "' not found");
}

void save_checkpoint(const std::string& path, const std::vector<CheckpointNetView>& nets,
                     std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    std::ostringstream header;
    header << kMagic << "\n";
    header << "config_hash " << std::hex << config_hash << std::dec << "\n";
    header << "nets " << nets.size() << "\n";
    for (const auto& view : nets) {
        const MlpParams& p = *view.net;
        header << "net " << view.name << " seed " << p.seed << " layers " << p.layers.size() << " embed ";
        if (view.embedding != nullptr && view.embedding->numel() > 0)
            header << view.embedding->shape[0] << " " << view.embedding->shape[1] << "\n";
        else
            header << "0 0\n";
        for (const auto& kv : view.meta) header << "meta " << kv.first << " " << kv.second << "\n";
        for (const auto& layer : p.layers)
            header << "layer " << layer.weight.shape[0] << " " << layer.weight.shape[1] << " "
                   << activation_name(layer.act) << "\n";
    }
    header << "end\n";
    out << header.str();

    for (const auto& view : nets) {
        for (const auto& layer : view.net->layers) {
            write_block(out, layer.weight);
            write_block(out, layer.bias);
        }
        if (view.embedding != nullptr && view.embedding->numel() > 0) write_block(out, *view.embedding);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);

    LoadedCheckpoint ckpt;
    std::size_t n_nets = 0;
    std::vector<std::pair<std::size_t, std::size_t>> embed_shapes;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "config_hash") {
            ls >> std::hex >> ckpt.config_hash >> std::dec;
        } else if (tag == "nets") {
            ls >> n_nets;
        } else if (tag == "net") {
            LoadedNet net;
            std::string kw;
            std::size_t n_layers = 0, er = 0, ec = 0;
            ls >> net.name >> kw >> net.net.seed >> kw >> n_layers >> kw >> er >> ec;
            net.net.layers.reserve(n_layers);
            ckpt.nets.push_back(std::move(net));
            embed_shapes.emplace_back(er, ec);
        } else if (tag == "meta") {
            if (ckpt.nets.empty()) throw std::runtime_error("checkpoint: meta before net in " + path);
            std::string key, value;
            ls >> key >> value;
            ckpt.nets.back().meta[key] = value;
        } else if (tag == "layer") {
            if (ckpt.nets.empty()) throw std::runtime_error("checkpoint: layer before net in " + path);
            std::size_t in_dim = 0, out_dim = 0;
            std::string act;
            ls >> in_dim >> out_dim >> act;
            MlpParams::Layer layer;
            layer.weight = Tensor::zeros({in_dim, out_dim});
            layer.bias = Tensor::zeros({out_dim});
            layer.act = activation_from_name(act);
            ckpt.nets.back().net.layers.push_back(std::move(layer));
        } else {
            throw std::runtime_error("checkpoint: unknown header line '" + line + "'");
        }
    }
    if (ckpt.nets.size() != n_nets) throw std::runtime_error("checkpoint: net count mismatch in " + path);

    for (std::size_t i = 0; i < ckpt.nets.size(); ++i) {
        for (auto& layer : ckpt.nets[i].net.layers) {
            read_block(in, layer.weight);
            read_block(in, layer.bias);
        }
        if (embed_shapes[i].first > 0) {
            ckpt.nets[i].embedding = Tensor::zeros({embed_shapes[i].first, embed_shapes[i].second});
            read_block(in, ckpt.nets[i].embedding);
            ckpt.nets[i].has_embedding = true;
        }
    }
    return ckpt;
}

}  // namespace vgm2p
