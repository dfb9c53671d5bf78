#include "seqfuse/mlp.hpp"

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"
#include "seqfuse/rng.hpp"

namespace seqfuse {

int MlpWeights::input_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int MlpWeights::output_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

void validate_mlp(const MlpWeights& mlp) {
    if (mlp.layers.empty()) throw WidthMismatch("mlp has no layers");
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        const auto& layer = mlp.layers[i];
        if (layer.bias.size() != layer.weight.rows())
            throw WidthMismatch("layer " + std::to_string(i) + " bias width " +
                                std::to_string(layer.bias.size()) + " != rows " +
                                std::to_string(layer.weight.rows()));
        if (i > 0 && layer.weight.cols() != mlp.layers[i - 1].weight.rows())
            throw WidthMismatch("layer " + std::to_string(i) + " input width " +
                                std::to_string(layer.weight.cols()) +
                                " does not chain with previous output " +
                                std::to_string(mlp.layers[i - 1].weight.rows()));
        if (!layer.weight.allFinite() || !layer.bias.allFinite())
            throw WidthMismatch("layer " + std::to_string(i) + " has non-finite entries");
    }
}

Eigen::MatrixXd mlp_apply_rows(const MlpWeights& mlp, const Eigen::MatrixXd& rows) {
    if (mlp.layers.empty()) throw WidthMismatch("mlp has no layers");
    if (rows.cols() != mlp.input_width())
        throw WidthMismatch("mlp expects input width " + std::to_string(mlp.input_width()) +
                            ", got " + std::to_string(rows.cols()));
    Eigen::MatrixXd x = rows;
    for (const auto& layer : mlp.layers) {
        x = (x * layer.weight.transpose()).rowwise() + layer.bias.transpose();
        if (layer.act == Activation::Relu) x = x.cwiseMax(0.0);
    }
    return x;
}

namespace {

DenseLayer seeded_layer(int out, int in, Activation act, Rng& rng) {
    DenseLayer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-0.1, 0.1);
    for (int r = 0; r < out; ++r) layer.bias(r) = rng.uniform(-0.1, 0.1);
    layer.act = act;
    return layer;
}

}  // namespace

MlpWeights seeded_mlp(int in, int hidden, int out, std::uint64_t seed) {
    Rng rng(mix_key(seed, 0x6d6c70));
    MlpWeights mlp;
    mlp.layers.push_back(seeded_layer(hidden, in, Activation::Relu, rng));
    mlp.layers.push_back(seeded_layer(out, hidden, Activation::None, rng));
    return mlp;
}

MlpWeights seeded_linear(int in, int out, std::uint64_t seed) {
    Rng rng(mix_key(seed, 0x6c696e));
    MlpWeights mlp;
    mlp.layers.push_back(seeded_layer(out, in, Activation::None, rng));
    return mlp;
}

std::string mlp_to_json(const MlpWeights& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : mlp.layers) {
        std::vector<double> weight;
        weight.reserve(static_cast<std::size_t>(layer.weight.size()));
        for (int r = 0; r < layer.weight.rows(); ++r)
            for (int c = 0; c < layer.weight.cols(); ++c) weight.push_back(layer.weight(r, c));
        std::vector<double> bias(layer.bias.data(), layer.bias.data() + layer.bias.size());
        layers.push_back({{"rows", layer.weight.rows()},
                          {"cols", layer.weight.cols()},
                          {"weight", weight},
                          {"bias", bias},
                          {"act", layer.act == Activation::Relu ? "relu" : "none"}});
    }
    return nlohmann::json{{"layers", layers}}.dump();
}

MlpWeights mlp_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("mlp JSON parse error: ") + e.what());
    }
    MlpWeights mlp;
    for (const auto& jl : j.at("layers")) {
        DenseLayer layer;
        const auto rows = jl.at("rows").get<int>();
        const auto cols = jl.at("cols").get<int>();
        const auto weight = jl.at("weight").get<std::vector<double>>();
        const auto bias = jl.at("bias").get<std::vector<double>>();
        if (static_cast<int>(weight.size()) != rows * cols ||
            static_cast<int>(bias.size()) != rows)
            throw ConfigError("mlp layer size fields disagree with array lengths");
        layer.weight.resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                layer.weight(r, c) = weight[static_cast<std::size_t>(r) * cols + c];
        layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
        const auto act = jl.at("act").get<std::string>();
        if (act == "relu") {
            layer.act = Activation::Relu;
        } else if (act == "none") {
            layer.act = Activation::None;
        } else {
            throw ConfigError("unknown activation '" + act + "'");
        }
        mlp.layers.push_back(std::move(layer));
    }
    validate_mlp(mlp);
    return mlp;
}

}  // namespace seqfuse
