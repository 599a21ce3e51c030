#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "qalloc/errors.hpp"
#include "qalloc/rng.hpp"

namespace qalloc
{
    /// Fully connected layer; weight is (out x in).
    struct DenseLayer
    {
        Eigen::MatrixXd weight;
        Eigen::VectorXd bias;
    };

    /// Rows are samples: states is B x D, targets is B x N.
    struct TrainBatch
    {
        Eigen::MatrixXd states;
        Eigen::MatrixXd targets;
    };

    struct Gradients
    {
        std::vector<DenseLayer> layers;
        double loss = 0.0;
    };

    /**
     * @brief Feedforward Q-network: input = state, one linear output unit per asset.
     *
     * Hidden layers use ReLU; the output layer is the identity. Training is one
     * full-batch gradient step on mean squared error per call.
     */
    class QNetwork
    {
    public:
        QNetwork() = default;

        QNetwork(std::vector<std::size_t> dims, std::vector<DenseLayer> layers, std::uint64_t seed)
            : dims_(std::move(dims)), layers_(std::move(layers)), seed_(seed)
        {
            check_dims(dims_);
            if (layers_.size() + 1 != dims_.size())
                throw std::invalid_argument("QNetwork: layer count does not match dims");
            for (std::size_t l = 0; l < layers_.size(); ++l)
            {
                const auto in = static_cast<Eigen::Index>(dims_[l]);
                const auto out = static_cast<Eigen::Index>(dims_[l + 1]);
                if (layers_[l].weight.rows() != out || layers_[l].weight.cols() != in || layers_[l].bias.size() != out)
                    throw std::invalid_argument("QNetwork: layer " + std::to_string(l) + " has the wrong shape");
            }
        }

        /// Glorot-uniform weights drawn in layer, row, column order; zero biases.
        static QNetwork init(std::vector<std::size_t> dims, std::uint64_t seed)
        {
            check_dims(dims);
            Rng rng(seed);
            std::vector<DenseLayer> layers;
            for (std::size_t l = 0; l + 1 < dims.size(); ++l)
            {
                const auto in = static_cast<Eigen::Index>(dims[l]);
                const auto out = static_cast<Eigen::Index>(dims[l + 1]);
                const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
                DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
                for (Eigen::Index r = 0; r < out; ++r)
                    for (Eigen::Index c = 0; c < in; ++c)
                        layer.weight(r, c) = rng.uniform(-limit, limit);
                layers.push_back(std::move(layer));
            }
            return QNetwork(std::move(dims), std::move(layers), seed);
        }

        const std::vector<std::size_t> &dims() const { return dims_; }
        std::size_t input_size() const { return dims_.front(); }
        std::size_t output_size() const { return dims_.back(); }
        std::uint64_t seed() const { return seed_; }
        const std::vector<DenseLayer> &layers() const { return layers_; }
        std::vector<DenseLayer> &layers() { return layers_; }

        std::size_t parameter_count() const
        {
            std::size_t n = 0;
            for (const auto &l : layers_)
                n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
            return n;
        }

        Eigen::MatrixXd forward_batch(const Eigen::MatrixXd &states) const
        {
            if (static_cast<std::size_t>(states.cols()) != input_size())
                throw std::invalid_argument("QNetwork: input width " + std::to_string(states.cols()) +
                                            " does not match network input " + std::to_string(input_size()));
            Eigen::MatrixXd a = states;
            for (std::size_t l = 0; l < layers_.size(); ++l)
            {
                Eigen::MatrixXd z = (a * layers_[l].weight.transpose()).rowwise() + layers_[l].bias.transpose();
                a = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
            }
            return a;
        }

        Eigen::VectorXd forward(const Eigen::VectorXd &state) const
        {
            return forward_batch(state.transpose()).row(0).transpose();
        }

        double loss(const TrainBatch &batch) const
        {
            check_batch(batch);
            const Eigen::MatrixXd err = forward_batch(batch.states) - batch.targets;
            return err.squaredNorm() / static_cast<double>(err.size());
        }

        /// Loss and its gradient with respect to every parameter, by backpropagation.
        Gradients gradients(const TrainBatch &batch) const
        {
            check_batch(batch);
            const std::size_t depth = layers_.size();
            std::vector<Eigen::MatrixXd> activations(depth + 1);
            std::vector<Eigen::MatrixXd> pre(depth);
            activations[0] = batch.states;
            for (std::size_t l = 0; l < depth; ++l)
            {
                pre[l] = (activations[l] * layers_[l].weight.transpose()).rowwise() + layers_[l].bias.transpose();
                activations[l + 1] = l + 1 < depth ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
            }

            const Eigen::MatrixXd err = activations[depth] - batch.targets;
            Gradients g;
            g.loss = err.squaredNorm() / static_cast<double>(err.size());
            if (!std::isfinite(g.loss))
            {
                for (Eigen::Index r = 0; r < err.rows(); ++r)
                    if (!err.row(r).allFinite())
                        throw NonFiniteLoss(static_cast<std::size_t>(r));
                throw NonFiniteLoss(0, "overflow in squared error");
            }

            g.layers.resize(depth);
            Eigen::MatrixXd delta = err * (2.0 / static_cast<double>(err.size()));
            for (std::size_t l = depth; l-- > 0;)
            {
                g.layers[l].weight = delta.transpose() * activations[l];
                g.layers[l].bias = delta.colwise().sum().transpose();
                if (l > 0)
                {
                    Eigen::MatrixXd back = delta * layers_[l].weight;
                    delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
                }
            }
            return g;
        }

        /// One gradient-descent step; returns the loss before the step.
        double train_batch(const TrainBatch &batch, double learning_rate)
        {
            Gradients g = gradients(batch);
            for (std::size_t l = 0; l < layers_.size(); ++l)
            {
                layers_[l].weight -= learning_rate * g.layers[l].weight;
                layers_[l].bias -= learning_rate * g.layers[l].bias;
            }
            for (std::size_t l = 0; l < layers_.size(); ++l)
                if (!layers_[l].weight.allFinite() || !layers_[l].bias.allFinite())
                    throw NumericError("non-finite parameters after update in layer " + std::to_string(l));
            return g.loss;
        }

        /// Parameters in layer order: weight (row-major) then bias.
        Eigen::VectorXd parameters() const { return flatten(layers_); }

        void set_parameters(const Eigen::VectorXd &flat)
        {
            if (static_cast<std::size_t>(flat.size()) != parameter_count())
                throw std::invalid_argument("set_parameters: wrong length");
            Eigen::Index k = 0;
            for (auto &l : layers_)
            {
                for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                        l.weight(r, c) = flat[k++];
                for (Eigen::Index i = 0; i < l.bias.size(); ++i)
                    l.bias[i] = flat[k++];
            }
        }

        static Eigen::VectorXd flatten(const std::vector<DenseLayer> &layers)
        {
            Eigen::Index total = 0;
            for (const auto &l : layers)
                total += l.weight.size() + l.bias.size();
            Eigen::VectorXd flat(total);
            Eigen::Index k = 0;
            for (const auto &l : layers)
            {
                for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                        flat[k++] = l.weight(r, c);
                for (Eigen::Index i = 0; i < l.bias.size(); ++i)
                    flat[k++] = l.bias[i];
            }
            return flat;
        }

    private:
        static void check_dims(const std::vector<std::size_t> &dims)
        {
            if (dims.size() < 2)
                throw std::invalid_argument("QNetwork: need at least input and output widths");
            for (auto d : dims)
                if (d == 0)
                    throw std::invalid_argument("QNetwork: layer widths must be positive");
        }

        void check_batch(const TrainBatch &batch) const
        {
            if (batch.states.rows() != batch.targets.rows())
                throw std::invalid_argument("TrainBatch: state and target row counts differ");
            if (static_cast<std::size_t>(batch.targets.cols()) != output_size())
                throw std::invalid_argument("TrainBatch: target width does not match network output");
            if (batch.states.rows() == 0)
                throw std::invalid_argument("TrainBatch: empty batch");
        }

        std::vector<std::size_t> dims_;
        std::vector<DenseLayer> layers_;
        std::uint64_t seed_ = 0;
    };

    /// Central finite differences of the batch loss, in QNetwork::parameters() order.
    inline Eigen::VectorXd numeric_gradient(const QNetwork &net, const TrainBatch &batch, double epsilon)
    {
        QNetwork probe = net;
        const Eigen::VectorXd theta = net.parameters();
        Eigen::VectorXd grad(theta.size());
        Eigen::VectorXd shifted = theta;
        for (Eigen::Index i = 0; i < theta.size(); ++i)
        {
            shifted[i] = theta[i] + epsilon;
            probe.set_parameters(shifted);
            const double up = probe.loss(batch);
            shifted[i] = theta[i] - epsilon;
            probe.set_parameters(shifted);
            const double down = probe.loss(batch);
            shifted[i] = theta[i];
            grad[i] = (up - down) / (2.0 * epsilon);
        }
        return grad;
    }

    /// max_i |analytic_i - numeric_i| / max(1, |numeric_i|)
    inline double max_relative_error(const Eigen::VectorXd &analytic, const Eigen::VectorXd &numeric)
    {
        if (analytic.size() != numeric.size())
            throw std::invalid_argument("max_relative_error: length mismatch");
        double worst = 0.0;
        for (Eigen::Index i = 0; i < analytic.size(); ++i)
            worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(numeric[i])));
        return worst;
    }

    inline double gradient_check(const QNetwork &net, const TrainBatch &batch, double epsilon)
    {
        if (!(epsilon > 0.0))
            throw std::invalid_argument("gradient_check: epsilon must be positive");
        const Eigen::VectorXd analytic = QNetwork::flatten(net.gradients(batch).layers);
        return max_relative_error(analytic, numeric_gradient(net, batch, epsilon));
    }

    // Checkpoints -------------------------------------------------------------

    inline constexpr int kCheckpointVersion = 1;

    inline nlohmann::json checkpoint_json(const QNetwork &net)
    {
        nlohmann::json j;
        j["format"] = "qalloc.qnet";
        j["version"] = kCheckpointVersion;
        j["dims"] = net.dims();
        j["seed"] = net.seed();
        j["layers"] = nlohmann::json::array();
        for (const auto &l : net.layers())
        {
            std::vector<double> w;
            w.reserve(static_cast<std::size_t>(l.weight.size()));
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                    w.push_back(l.weight(r, c));
            std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
            j["layers"].push_back({{"weight", w}, {"bias", b}});
        }
        return j;
    }

    inline QNetwork network_from_checkpoint(const nlohmann::json &j)
    {
        try
        {
            if (j.at("format") != "qalloc.qnet")
                throw DataError("checkpoint: unknown format");
            if (j.at("version").get<int>() != kCheckpointVersion)
                throw DataError("checkpoint: unsupported version " + j.at("version").dump());
            auto dims = j.at("dims").get<std::vector<std::size_t>>();
            auto seed = j.at("seed").get<std::uint64_t>();
            const auto &jl = j.at("layers");
            if (dims.size() < 2 || jl.size() + 1 != dims.size())
                throw DataError("checkpoint: layer list does not match dims");
            std::vector<DenseLayer> layers;
            for (std::size_t l = 0; l < jl.size(); ++l)
            {
                const auto in = static_cast<Eigen::Index>(dims[l]);
                const auto out = static_cast<Eigen::Index>(dims[l + 1]);
                auto w = jl[l].at("weight").get<std::vector<double>>();
                auto b = jl[l].at("bias").get<std::vector<double>>();
                if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
                    throw DataError("checkpoint: layer " + std::to_string(l) + " has the wrong parameter count");
                DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
                std::size_t k = 0;
                for (Eigen::Index r = 0; r < out; ++r)
                    for (Eigen::Index c = 0; c < in; ++c)
                        layer.weight(r, c) = w[k++];
                for (Eigen::Index i = 0; i < out; ++i)
                    layer.bias[i] = b[static_cast<std::size_t>(i)];
                layers.push_back(std::move(layer));
            }
            return QNetwork(std::move(dims), std::move(layers), seed);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw DataError(std::string("checkpoint: malformed (") + e.what() + ")");
        }
    }

    inline void save_checkpoint(const QNetwork &net, const std::filesystem::path &path)
    {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
        out << checkpoint_json(net).dump() << '\n';
    }

    inline QNetwork load_checkpoint(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw DataError("cannot open checkpoint '" + path.string() + "'");
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw DataError(std::string("checkpoint: invalid JSON (") + e.what() + ")");
        }
        return network_from_checkpoint(j);
    }

} // namespace qalloc
