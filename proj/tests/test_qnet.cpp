#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>

#include "test_support.hpp"

using namespace qalloc;
using qalloc::testing::temp_dir;

namespace
{
    TrainBatch random_batch(Eigen::Index rows, Eigen::Index in, Eigen::Index out, std::uint64_t seed)
    {
        Rng rng(seed);
        TrainBatch b{Eigen::MatrixXd(rows, in), Eigen::MatrixXd(rows, out)};
        for (Eigen::Index r = 0; r < rows; ++r)
        {
            for (Eigen::Index c = 0; c < in; ++c)
                b.states(r, c) = rng.normal();
            for (Eigen::Index c = 0; c < out; ++c)
                b.targets(r, c) = 0.1 * rng.normal();
        }
        return b;
    }

    /// Straight-line evaluation with explicit loops, no Eigen products.
    Eigen::VectorXd reference_forward(const QNetwork &net, const Eigen::VectorXd &x)
    {
        std::vector<double> a(x.data(), x.data() + x.size());
        const auto &layers = net.layers();
        for (std::size_t l = 0; l < layers.size(); ++l)
        {
            const auto &L = layers[l];
            std::vector<double> z(static_cast<std::size_t>(L.weight.rows()));
            for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
            {
                double s = L.bias[r];
                for (Eigen::Index c = 0; c < L.weight.cols(); ++c)
                    s += L.weight(r, c) * a[static_cast<std::size_t>(c)];
                z[static_cast<std::size_t>(r)] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
            }
            a = std::move(z);
        }
        return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    }

    QNetwork with_random_biases(const QNetwork &net, std::uint64_t seed)
    {
        auto layers = net.layers();
        Rng rng(seed);
        for (auto &l : layers)
            for (auto &b : l.bias)
                b = 0.1 * rng.normal();
        return QNetwork(net.dims(), layers, net.seed());
    }
} // namespace

TEST(QNetworkInit, SameSeedBitIdentical)
{
    auto a = QNetwork::init({35, 16, 8, 5}, 99);
    auto b = QNetwork::init({35, 16, 8, 5}, 99);
    EXPECT_EQ(a.parameters(), b.parameters());
    auto c = QNetwork::init({35, 16, 8, 5}, 100);
    EXPECT_NE(a.parameters(), c.parameters());
}

TEST(QNetworkInit, GlorotBoundsAndZeroBias)
{
    auto net = QNetwork::init({40, 30, 6}, 5);
    for (const auto &l : net.layers())
    {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.cols() + l.weight.rows()));
        EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), limit);
        EXPECT_TRUE(l.bias.isZero(0.0));
    }
}

TEST(QNetworkInit, ParameterCountClosedForm)
{
    // 840*128 + 128 + 128*64 + 64 + 64*28 + 28
    const std::size_t expected = 840 * 128 + 128 + 128 * 64 + 64 + 64 * 28 + 28;
    EXPECT_EQ(expected, 117724u);
    auto net = QNetwork::init({840, 128, 64, 28}, 1);
    EXPECT_EQ(net.parameter_count(), expected);
    EXPECT_EQ(static_cast<std::size_t>(net.parameters().size()), expected);
}

TEST(QNetworkInit, InvalidDims)
{
    EXPECT_THROW(QNetwork::init({10, 0, 3}, 1), std::invalid_argument);
    EXPECT_THROW(QNetwork::init({10}, 1), std::invalid_argument);
}

TEST(Forward, ZeroParametersGiveZero)
{
    auto net = QNetwork::init({8, 4, 2}, 1);
    net.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count())));
    Rng rng(1);
    Eigen::VectorXd x(8);
    for (auto &v : x)
        v = rng.normal();
    EXPECT_TRUE(net.forward(x).isZero(0.0));
    EXPECT_EQ(net.forward(x).size(), 2);
}

TEST(Forward, OutputBiasPassesThrough)
{
    auto net = QNetwork::init({6, 5, 3}, 2);
    auto layers = net.layers();
    layers[0].weight.setZero();
    layers[1].bias << 0.5, -1.25, 3.0;
    QNetwork edited(net.dims(), layers, net.seed());
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -2, 3);
    EXPECT_EQ(edited.forward(x), layers[1].bias);
}

TEST(Forward, MatchesStraightLineOracle)
{
    auto net = QNetwork::init({12, 9, 7, 4}, 3);
    auto flat = net.parameters();
    Rng rng(3);
    for (auto &v : flat)
        v += 0.1 * rng.normal();
    net.set_parameters(flat);
    for (int trial = 0; trial < 20; ++trial)
    {
        Eigen::VectorXd x(12);
        for (auto &v : x)
            v = rng.normal();
        EXPECT_LT((net.forward(x) - reference_forward(net, x)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Forward, DimensionMismatchThrows)
{
    auto net = QNetwork::init({5, 3, 2}, 1);
    EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST(Forward, HomogeneousInOutputLayerWeights)
{
    auto net = QNetwork::init({10, 6, 3}, 8);
    auto layers = net.layers();
    QNetwork base(net.dims(), layers, net.seed());
    layers.back().weight *= 2.0;
    QNetwork doubled(net.dims(), layers, net.seed());
    Rng rng(8);
    Eigen::VectorXd x(10);
    for (auto &v : x)
        v = rng.normal();
    EXPECT_LT((doubled.forward(x) - 2.0 * base.forward(x)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TrainBatch, TargetsEqualOutputsGiveZeroLossNoChange)
{
    auto net = QNetwork::init({7, 5, 3}, 4);
    TrainBatch b = random_batch(32, 7, 3, 4);
    b.targets = net.forward_batch(b.states);
    const auto before = net.parameters();
    EXPECT_EQ(net.train_batch(b, 0.1), 0.0);
    EXPECT_EQ(net.parameters(), before);
}

TEST(TrainBatch, HandSolvedOneParameterStep)
{
    // loss (w - 1)^2, gradient 2(w - 1) = -2 at w = 0, lr 0.5 moves w to 1
    QNetwork net({1, 1}, {DenseLayer{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)}}, 0);
    TrainBatch b{Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)};
    const double loss = net.train_batch(b, 0.5);
    EXPECT_EQ(loss, 1.0);
    EXPECT_EQ(net.layers()[0].weight(0, 0), 1.0);
}

TEST(TrainBatch, LossNonIncreasingOnFixedBatch)
{
    auto net = QNetwork::init({10, 16, 8, 4}, 12);
    TrainBatch b = random_batch(32, 10, 4, 12);
    double prev = net.loss(b);
    for (int k = 0; k < 100; ++k)
    {
        const double pre = net.train_batch(b, 1e-3);
        EXPECT_EQ(pre, prev);
        prev = net.loss(b);
        EXPECT_LE(prev, pre);
    }
}

TEST(TrainBatch, LossIsMeanOverRowsAndHeads)
{
    auto net = QNetwork::init({4, 3, 2}, 1);
    TrainBatch b = random_batch(5, 4, 2, 1);
    double s = 0;
    for (Eigen::Index r = 0; r < 5; ++r)
    {
        Eigen::VectorXd q = reference_forward(net, b.states.row(r).transpose());
        for (Eigen::Index c = 0; c < 2; ++c)
            s += (q[c] - b.targets(r, c)) * (q[c] - b.targets(r, c));
    }
    EXPECT_NEAR(net.loss(b), s / 10.0, 1e-15);
}

TEST(TrainBatch, NonFiniteLossCarriesRowIndex)
{
    auto net = QNetwork::init({3, 2}, 1);
    TrainBatch b = random_batch(6, 3, 2, 1);
    b.targets(4, 1) = std::numeric_limits<double>::infinity();
    const auto before = net.parameters();
    try
    {
        net.train_batch(b, 0.01);
        FAIL() << "expected NonFiniteLoss";
    }
    catch (const NonFiniteLoss &e)
    {
        EXPECT_EQ(e.batch_row(), 4u);
    }
    EXPECT_EQ(net.parameters(), before);
}

TEST(TrainBatch, MalformedBatchRejected)
{
    auto net = QNetwork::init({3, 2}, 1);
    EXPECT_THROW(net.train_batch({Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 2)}, 0.1), std::invalid_argument);
    EXPECT_THROW(net.train_batch({Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 5)}, 0.1), std::invalid_argument);
}

TEST(GradientCheck, SeededSmallNets)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
    {
        auto net = with_random_biases(QNetwork::init({9, 7, 5, 3}, seed), seed);
        EXPECT_LT(gradient_check(net, random_batch(8, 9, 3, seed + 100), 1e-5), 1e-4);
    }
}

TEST(GradientCheck, LinearNetMatchesExactly)
{
    auto net = QNetwork::init({6, 3}, 2);
    EXPECT_LT(gradient_check(net, random_batch(4, 6, 3, 2), 1e-5), 1e-9);
}

TEST(GradientCheck, DetectsPerturbedBackprop)
{
    auto net = QNetwork::init({6, 5, 3}, 3);
    TrainBatch b = random_batch(8, 6, 3, 3);
    const Eigen::VectorXd analytic = QNetwork::flatten(net.gradients(b).layers);
    const Eigen::VectorXd numeric = numeric_gradient(net, b, 1e-5);
    const double clean = max_relative_error(analytic, numeric);
    const double mutated = max_relative_error(1.01 * analytic, numeric);
    EXPECT_GT(mutated, clean);
    EXPECT_GT(mutated, 1e-3 * analytic.cwiseAbs().maxCoeff());
}

TEST(Checkpoint, RoundTripBitExact)
{
    auto net = QNetwork::init({35, 16, 8, 5}, 77);
    TrainBatch b = random_batch(32, 35, 5, 77);
    for (int k = 0; k < 5; ++k)
        net.train_batch(b, 1e-2);
    const auto path = temp_dir("ckpt") / "net.json";
    save_checkpoint(net, path);
    QNetwork back = load_checkpoint(path);
    EXPECT_EQ(back.dims(), net.dims());
    EXPECT_EQ(back.seed(), net.seed());
    const auto p0 = net.parameters();
    const auto p1 = back.parameters();
    ASSERT_EQ(p0.size(), p1.size());
    for (Eigen::Index i = 0; i < p0.size(); ++i)
        EXPECT_EQ(std::bit_cast<std::uint64_t>(p0[i]), std::bit_cast<std::uint64_t>(p1[i]));
}

TEST(Checkpoint, CorruptFilesRejected)
{
    const auto dir = temp_dir("ckpt_bad");
    EXPECT_THROW(load_checkpoint(dir / "missing.json"), DataError);
    std::ofstream(dir / "garbage.json") << "{not json";
    EXPECT_THROW(load_checkpoint(dir / "garbage.json"), DataError);
    auto j = checkpoint_json(QNetwork::init({4, 2}, 1));
    j["layers"][0]["bias"] = std::vector<double>{1.0};
    EXPECT_THROW(network_from_checkpoint(j), DataError);
    j = checkpoint_json(QNetwork::init({4, 2}, 1));
    j["version"] = 99;
    EXPECT_THROW(network_from_checkpoint(j), DataError);
}
