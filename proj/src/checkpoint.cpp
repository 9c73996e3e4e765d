#include "credal/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace credal::training {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t to_little_endian(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i)
            r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
    return v;
}

std::string blob_name(std::size_t index)
{
    std::ostringstream ss;
    ss << "param_" << index << ".bin";
    return ss.str();
}

} // namespace

void save_checkpoint(const model::GnnModel& model, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    const auto& cfg = model.config();
    json manifest;
    manifest["format"] = "credal-checkpoint";
    manifest["version"] = 1;
    manifest["model"] = {{"kind", model::to_string(cfg.kind)},
                         {"num_classes", cfg.num_classes},
                         {"backbone",
                          {{"kind", gnn::to_string(cfg.backbone.kind)},
                           {"num_layers", cfg.backbone.num_layers},
                           {"hidden_dim", cfg.backbone.hidden_dim},
                           {"input_dim", cfg.backbone.input_dim},
                           {"dropout", cfg.backbone.dropout}}}};
    json params = json::array();
    const auto& ps = model.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps[i];
        params.push_back({{"name", p.name},
                          {"shape", {p.value.rows(), p.value.cols()}},
                          {"dtype", "float64"},
                          {"file", blob_name(i)}});
        std::ofstream out(dir / blob_name(i), std::ios::binary);
        if (!out)
            throw CheckpointError("cannot write " + (dir / blob_name(i)).string());
        for (Eigen::Index k = 0; k < p.value.size(); ++k) {
            const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(p.value.data()[k]));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    manifest["parameters"] = params;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out)
        throw CheckpointError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

model::GnnModel load_checkpoint(const fs::path& dir, std::optional<model::ModelKind> expected_kind)
{
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in)
        throw CheckpointError("missing manifest in " + dir.string());
    json manifest;
    model::ModelConfig cfg;
    try {
        manifest = json::parse(in);
        if (manifest.at("format") != "credal-checkpoint")
            throw CheckpointError("not a credal checkpoint");
        const auto& m = manifest.at("model");
        cfg.kind = model::parse_model_kind(m.at("kind").get<std::string>());
        cfg.num_classes = m.at("num_classes").get<int>();
        const auto& b = m.at("backbone");
        cfg.backbone.kind = gnn::parse_backbone_kind(b.at("kind").get<std::string>());
        cfg.backbone.num_layers = b.at("num_layers").get<int>();
        cfg.backbone.hidden_dim = b.at("hidden_dim").get<int>();
        cfg.backbone.input_dim = b.at("input_dim").get<int>();
        cfg.backbone.dropout = b.at("dropout").get<double>();
    } catch (const json::exception& e) {
        throw CheckpointError("malformed manifest: " + std::string(e.what()));
    }
    if (expected_kind && *expected_kind != cfg.kind)
        throw CheckpointError("checkpoint holds a " + model::to_string(cfg.kind) + " model, expected " +
                              model::to_string(*expected_kind));

    // Parameter layout must match a freshly initialized model of this config.
    auto reference = model::GnnModel::initialize(cfg, 0);
    autodiff::ParameterSet params;
    const auto& entries = manifest.at("parameters");
    if (entries.size() != reference.params().size())
        throw CheckpointError("manifest parameter count does not match model config");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto name = e.at("name").get<std::string>();
        const auto rows = e.at("shape").at(0).get<Eigen::Index>();
        const auto cols = e.at("shape").at(1).get<Eigen::Index>();
        const auto& ref = reference.params()[i];
        if (name != ref.name || rows != ref.value.rows() || cols != ref.value.cols())
            throw CheckpointError("manifest entry '" + name + "' does not match model config");
        if (e.at("dtype") != "float64")
            throw CheckpointError("unsupported dtype for '" + name + "'");

        const auto path = dir / e.at("file").get<std::string>();
        std::ifstream blob(path, std::ios::binary);
        if (!blob)
            throw CheckpointError("missing blob " + path.string());
        const auto expected_bytes = static_cast<std::uintmax_t>(rows * cols) * 8u;
        std::error_code ec;
        const auto actual = fs::file_size(path, ec);
        if (ec || actual != expected_bytes)
            throw CheckpointError("corrupt blob " + path.string() + ": expected " +
                                  std::to_string(expected_bytes) + " bytes, found " +
                                  std::to_string(ec ? 0 : actual));
        Matrix value(rows, cols);
        for (Eigen::Index k = 0; k < value.size(); ++k) {
            std::uint64_t bits = 0;
            blob.read(reinterpret_cast<char*>(&bits), sizeof bits);
            value.data()[k] = std::bit_cast<double>(to_little_endian(bits));
        }
        if (!blob)
            throw CheckpointError("corrupt blob " + path.string());
        params.push_back({name, std::move(value)});
    }
    return model::GnnModel(cfg, std::move(params));
}

} // namespace credal::training
