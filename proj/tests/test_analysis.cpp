#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mcdrop/analysis.hpp"
#include "mcdrop/errors.hpp"

using namespace mcdrop;

namespace {

// Dense Gaussian elimination with partial pivoting, kept separate from the
// library's Cholesky path.
Vector gauss_solve(std::vector<std::vector<double>> a, Vector b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) {
            s -= a[i][c] * x[c];
        }
        x[i] = s / a[i][i];
    }
    return x;
}

struct Scatter {
    std::vector<std::vector<double>> within;
    std::vector<std::vector<double>> between;
    std::vector<Vector> means;
};

Scatter scatter_oracle(const LabeledDataset& d) {
    const std::size_t n = d.size();
    const std::size_t p = d.dim();
    const std::size_t c = d.num_classes();
    Scatter s;
    s.means.assign(c, Vector(p, 0.0));
    std::vector<double> counts(c, 0.0);
    Vector grand(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        counts[d.labels[i]] += 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            s.means[d.labels[i]][j] += d.features(i, j);
            grand[j] += d.features(i, j) / static_cast<double>(n);
        }
    }
    for (std::size_t k = 0; k < c; ++k) {
        for (double& v : s.means[k]) {
            v /= counts[k];
        }
    }
    s.within.assign(p, std::vector<double>(p, 0.0));
    s.between.assign(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const Vector& m = s.means[d.labels[i]];
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                s.within[a][b] += (d.features(i, a) - m[a]) * (d.features(i, b) - m[b]) / static_cast<double>(n);
            }
        }
    }
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                s.between[a][b] += counts[k] * (s.means[k][a] - grand[a]) * (s.means[k][b] - grand[b]) /
                                   static_cast<double>(n);
            }
        }
    }
    return s;
}

double angle(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    // Directions are defined up to sign.
    return std::acos(std::min(1.0, std::abs(ab) / std::sqrt(aa * bb)));
}

LabeledDataset gaussian_classes(const std::vector<Vector>& centres, std::size_t per, std::uint64_t seed,
                                const std::vector<double>& scales) {
    RngStream rng(seed, 31);
    const std::size_t p = centres[0].size();
    LabeledDataset d;
    d.features = Matrix(centres.size() * per, p);
    for (std::size_t j = 0; j < p; ++j) {
        d.feature_names.push_back("f" + std::to_string(j));
    }
    for (std::size_t c = 0; c < centres.size(); ++c) {
        d.class_names.push_back(c == 0 ? "NM" : "C" + std::to_string(c));
        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t row = c * per + k;
            // Correlated noise: each coordinate borrows from the previous one.
            double prev = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double z = rng.normal();
                d.features(row, j) = centres[c][j] + scales[j] * z + 0.5 * prev;
                prev = z;
            }
            d.labels.push_back(c);
            d.severity.push_back(c == 0 ? 0 : 4);
        }
    }
    return d;
}

SweepEntry synthetic_entry(double rate, double diag, double var) {
    SweepEntry e;
    e.rate = rate;
    e.rows.conditions = {"NM", "F"};
    e.rows.true_labels = {0, 1};
    e.rows.mean = Matrix{{diag, 1.0 - diag}, {1.0 - diag, diag}};
    e.rows.variance = Matrix{{var, var}, {var, var}};
    e.rows.pooled_variance = e.rows.variance;
    return e;
}

SweepResult synthetic_sweep(const std::vector<double>& rates, const std::vector<double>& diags) {
    SweepResult s;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        s.entries.push_back(synthetic_entry(rates[i], diags[i], 0.01 * rates[i]));
    }
    return s;
}

FieldScan synthetic_scan(double switch_radius) {
    FieldScan scan;
    scan.resolution = 40;
    for (std::size_t i = 0; i < 40; ++i) {
        scan.xs.push_back(-1.2 + (i + 0.5) * 2.4 / 40);
    }
    scan.ys = scan.xs;
    for (std::size_t iy = 0; iy < 40; ++iy) {
        for (std::size_t ix = 0; ix < 40; ++ix) {
            PredictiveSummary s;
            const bool inside = std::hypot(scan.xs[ix], scan.ys[iy]) < switch_radius;
            s.mean = inside ? Vector{0.9, 0.1} : Vector{0.1, 0.9};
            s.variance = {0.0, inside ? 0.0 : 0.02};
            s.stddev = {0.0, std::sqrt(s.variance[1])};
            s.predicted_class = inside ? 0 : 1;
            scan.cells.push_back(s);
        }
    }
    return scan;
}

NetworkParams toy_model(double p, std::size_t epochs = 20) {
    NetworkConfig nc;
    nc.input_dim = 2;
    nc.hidden_layers = {20, 20};
    nc.num_classes = 2;
    nc.dropout_rate = p;
    TrainConfig tc;
    tc.epochs = epochs;
    tc.learning_rate = 5e-3;
    return train(nc, tc, filter_severity(gen_toy2d(300, 1), {0, 4})).params;
}

}  // namespace

// ------------------------------------------------------------------- LDA

TEST(Lda, TwoClassDirectionFromExactConstruction) {
    // Each class is mu +/- a_j e_j, so Sw = diag(a_j^2 / p) exactly and the
    // Fisher direction is proportional to dmu_j / a_j^2.
    const std::size_t p = 4;
    const Vector a{0.5, 1.0, 2.0, 0.8};
    const Vector mu0{0.0, 1.0, -1.0, 0.5};
    const Vector mu1{1.0, -0.5, 2.0, 0.0};
    LabeledDataset d;
    d.features = Matrix(4 * p, p);
    d.feature_names = {"a", "b", "c", "d"};
    d.class_names = {"NM", "F"};
    std::size_t row = 0;
    for (std::size_t c = 0; c < 2; ++c) {
        const Vector& mu = c == 0 ? mu0 : mu1;
        for (std::size_t j = 0; j < p; ++j) {
            for (double sign : {1.0, -1.0}) {
                for (std::size_t k = 0; k < p; ++k) {
                    d.features(row, k) = mu[k] + (k == j ? sign * a[j] : 0.0);
                }
                d.labels.push_back(c);
                d.severity.push_back(c == 0 ? 0 : 4);
                ++row;
            }
        }
    }
    Vector expected(p);
    for (std::size_t j = 0; j < p; ++j) {
        expected[j] = (mu1[j] - mu0[j]) / (a[j] * a[j]);
    }
    const LdaProjection proj = lda_fit(d, 1);
    EXPECT_LT(angle(proj.projection.column(0), expected), 1e-3);
    EXPECT_FALSE(proj.ridge_applied);
}

TEST(Lda, TwoClassDirectionMatchesIndependentSolve) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const LabeledDataset d =
            gaussian_classes({{0, 0, 0, 0, 0}, {1.5, -0.5, 1.0, 0.3, -1.0}}, 400, seed, {1.0, 0.5, 2.0, 1.5, 0.7});
        const Scatter s = scatter_oracle(d);
        Vector dmu(d.dim());
        for (std::size_t j = 0; j < d.dim(); ++j) {
            dmu[j] = s.means[1][j] - s.means[0][j];
        }
        const Vector expected = gauss_solve(s.within, dmu);
        EXPECT_LT(angle(lda_fit(d, 1).projection.column(0), expected), 1e-3) << "seed " << seed;
    }
}

TEST(Lda, GeneralizedEigenResidualsAndMeans) {
    const LabeledDataset d = gaussian_classes(
        {{0, 0, 0, 0}, {2, 0, 1, 0}, {0, 2, 0, -1}, {-1, -1, 2, 2}}, 150, 4, {1.0, 0.8, 1.2, 0.6});
    const LdaProjection proj = lda_fit(d, 3);
    const Scatter s = scatter_oracle(d);
    const std::size_t p = d.dim();
    for (std::size_t k = 0; k < 3; ++k) {
        const Vector v = proj.projection.column(k);
        double norm = 0.0;
        for (std::size_t a = 0; a < p; ++a) {
            double sb = 0.0;
            double sw = 0.0;
            for (std::size_t b = 0; b < p; ++b) {
                sb += s.between[a][b] * v[b];
                sw += s.within[a][b] * v[b];
            }
            EXPECT_NEAR(sb, proj.eigenvalues[k] * sw, 1e-9);
            norm += v[a] * sw;
        }
        EXPECT_NEAR(norm, 1.0, 1e-9);
        if (k > 0) {
            EXPECT_GE(proj.eigenvalues[k - 1], proj.eigenvalues[k]);
        }
    }
    for (std::size_t c = 0; c < d.num_classes(); ++c) {
        for (std::size_t k = 0; k < 3; ++k) {
            double m = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                m += s.means[c][j] * proj.projection(j, k);
            }
            EXPECT_NEAR(proj.class_means(c, k), m, 1e-9);
        }
    }
    EXPECT_EQ(proj.fingerprint, lda_fit(d, 3).fingerprint);
    EXPECT_EQ(proj.fingerprint.size(), 16u);
}

TEST(Lda, FullRankProjectionKeepsFisherCriterion) {
    const LabeledDataset d = gaussian_classes({{0, 0}, {2, 1}, {-1, 2}}, 200, 5, {1.0, 0.6});
    const LdaProjection proj = lda_fit(d, 2);
    const Matrix z = lda_transform(proj, d.features);
    EXPECT_NEAR(fisher_criterion(z, d.labels, 3), fisher_criterion(d.features, d.labels, 3), 1e-9);
    // In LDA coordinates Sw is the identity, so the criterion is the eigenvalue sum.
    EXPECT_NEAR(fisher_criterion(z, d.labels, 3), proj.eigenvalues[0] + proj.eigenvalues[1], 1e-9);
}

TEST(Lda, ProjectedGeometryIsAffineInvariant) {
    const LabeledDataset d = gaussian_classes({{0, 0, 0}, {2, 1, 0}, {-1, 2, 1}}, 200, 6, {1.0, 0.6, 0.9});
    LabeledDataset moved = d;
    const Matrix a{{2.0, 0.3, -0.1}, {0.0, 0.5, 0.2}, {0.4, 0.0, 3.0}};
    const Vector shift{10.0, -4.0, 0.5};
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Vector y = matvec(a, d.features.row(i));
        for (std::size_t j = 0; j < 3; ++j) {
            moved.features(i, j) = y[j] + shift[j];
        }
    }
    const LdaProjection p1 = lda_fit(d, 2);
    const LdaProjection p2 = lda_fit(moved, 2);
    for (std::size_t c1 = 0; c1 < 3; ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < 3; ++c2) {
            auto dist = [&](const LdaProjection& p) {
                return std::hypot(p.class_means(c1, 0) - p.class_means(c2, 0),
                                  p.class_means(c1, 1) - p.class_means(c2, 1));
            };
            EXPECT_NEAR(dist(p1), dist(p2), 1e-6);
        }
    }
    EXPECT_NEAR(p1.eigenvalues[0], p2.eigenvalues[0], 1e-8);
}

TEST(Lda, RejectsDegenerateRequests) {
    LabeledDataset d = gaussian_classes({{0, 0}, {2, 1}, {-1, 2}}, 5, 7, {1.0, 1.0});
    EXPECT_THROW(lda_fit(d, 0), InvalidArgument);
    EXPECT_THROW(lda_fit(d, 3), InvalidArgument);
    EXPECT_NO_THROW(lda_fit(d, 2));
    LabeledDataset lonely = d.subset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    EXPECT_THROW(lda_fit(lonely, 1), InvalidArgument);
    const LdaProjection proj = lda_fit(d, 2);
    EXPECT_THROW(lda_transform(proj, Matrix(2, 3)), DimensionError);
}

TEST(Lda, NearFaultsProjectCloserToNormal) {
    ChillerSynthConfig cfg;
    cfg.samples_per_condition = 100;
    const LabeledDataset train = standardize(filter_severity(gen_chiller(cfg, 3), {0, 4}));
    const LdaProjection proj = lda_fit(train, 2);
    auto dist = [&](std::size_t c) {
        return std::hypot(proj.class_means(c, 0) - proj.class_means(0, 0),
                          proj.class_means(c, 1) - proj.class_means(0, 1));
    };
    double near = 0.0;
    double far = 0.0;
    for (std::size_t f = 0; f < 6; ++f) {
        (cfg.near_fault[f] ? near : far) += dist(f + 1) / 3.0;
    }
    EXPECT_LT(near, far);
}

// ----------------------------------------------------------------- sweep

TEST(Sweep, TrainsOneModelPerRate) {
    const LabeledDataset toy = gen_toy2d(150, 2);
    const LabeledDataset train_data = filter_severity(toy, {0, 4});
    NetworkConfig nc;
    nc.input_dim = 2;
    nc.hidden_layers = {10, 10};
    nc.num_classes = 2;
    TrainConfig tc;
    tc.epochs = 3;
    SweepOptions opt;
    opt.mc_samples = 10;
    const auto& rates = default_dropout_rates();
    const SweepResult a = sweep_dropout(rates, nc, tc, train_data, toy, opt);
    ASSERT_EQ(a.entries.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(a.entries[i].rate, rates[i]);
        EXPECT_FALSE(a.entries[i].error);
        EXPECT_EQ(a.entries[i].trace.loss.size(), 3u);
        EXPECT_EQ(a.entries[i].rows.conditions, (std::vector<std::string>{"NM", "FAULT-SL4", "FAULT-SL2"}));
    }
    for (double v : a.entries[0].rows.variance.values()) {
        EXPECT_EQ(v, 0.0);
    }
    const SweepResult b = sweep_dropout(rates, nc, tc, train_data, toy, opt);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(a.entries[i].params, b.entries[i].params);
        EXPECT_EQ(a.entries[i].rows.mean, b.entries[i].rows.mean);
    }

    const std::vector<double> dup{0.0, 0.1, 0.1};
    EXPECT_THROW(sweep_dropout(dup, nc, tc, train_data, toy, opt), InvalidArgument);
    const std::vector<double> bad{0.0, 1.0};
    EXPECT_THROW(sweep_dropout(bad, nc, tc, train_data, toy, opt), InvalidArgument);
}

TEST(Sweep, DivergenceIsRecordedPerRate) {
    const LabeledDataset toy = gen_toy2d(50, 2);
    NetworkConfig nc;
    nc.input_dim = 2;
    nc.hidden_layers = {10};
    nc.num_classes = 2;
    TrainConfig tc;
    tc.epochs = 3;
    tc.learning_rate = 1e200;
    const std::vector<double> rates{0.0, 0.1, 0.2};
    const SweepResult r = sweep_dropout(rates, nc, tc, filter_severity(toy, {0, 4}), toy);
    ASSERT_EQ(r.entries.size(), 3u);
    for (const auto& e : r.entries) {
        EXPECT_TRUE(e.error.has_value());
        EXPECT_FALSE(e.params.has_value());
    }
    EXPECT_THROW(select_dropout_rate(r), InvalidArgument);
}

TEST(Sweep, GroupingAndAccuracy) {
    const LabeledDataset toy = gen_toy2d(4, 3);
    std::vector<PredictiveSummary> s(toy.size());
    for (std::size_t i = 0; i < toy.size(); ++i) {
        s[i].mean = toy.labels[i] == 0 ? Vector{0.8, 0.2} : Vector{0.6, 0.4};
        s[i].variance = {0.0, 0.0};
        s[i].stddev = {0.0, 0.0};
        s[i].predicted_class = 0;
    }
    const auto groups = group_by_condition(toy, s);
    ASSERT_EQ(groups.size(), 3u);
    EXPECT_EQ(groups[1].name, "FAULT-SL4");
    EXPECT_EQ(groups[1].members.size(), 4u);
    EXPECT_DOUBLE_EQ(summary_accuracy(toy, s), 1.0 / 3.0);
}

// ------------------------------------------------------------- selection

TEST(Selection, PicksLargestRateBeforeTheKnee) {
    const std::vector<double> rates{0.0, 0.03, 0.1, 0.2, 0.5};
    const RateSelection only_top_degrades = select_dropout_rate(synthetic_sweep(rates, {0.9, 0.9, 0.89, 0.88, 0.4}));
    EXPECT_EQ(only_top_degrades.rate, 0.2);
    EXPECT_FALSE(only_top_degrades.fallback);
    ASSERT_EQ(only_top_degrades.curve.size(), 5u);
    EXPECT_FALSE(only_top_degrades.curve[4].passes);

    const RateSelection all_perfect = select_dropout_rate(synthetic_sweep(rates, {1, 1, 1, 1, 1}));
    EXPECT_EQ(all_perfect.rate, 0.2);

    // The walk stops at the first failure even if a later rate recovers.
    const RateSelection dip = select_dropout_rate(synthetic_sweep(rates, {0.9, 0.9, 0.5, 0.9, 0.9}));
    EXPECT_EQ(dip.rate, 0.03);

    const RateSelection fallback = select_dropout_rate(synthetic_sweep(rates, {0.9, 0.5, 0.5, 0.5, 0.5}));
    EXPECT_EQ(fallback.rate, 0.03);
    EXPECT_TRUE(fallback.fallback);
    EXPECT_FALSE(fallback.rationale.empty());
}

TEST(Selection, OrderOfEntriesDoesNotMatter) {
    const SweepResult forward = synthetic_sweep({0.0, 0.1, 0.2, 0.5}, {0.9, 0.89, 0.87, 0.6});
    SweepResult backward;
    backward.entries.assign(forward.entries.rbegin(), forward.entries.rend());
    EXPECT_EQ(select_dropout_rate(forward).rate, select_dropout_rate(backward).rate);
    EXPECT_EQ(select_dropout_rate(backward).curve.front().rate, 0.0);
}

TEST(Selection, DroppingLargerRatesKeepsTheChoice) {
    const std::vector<double> rates{0.0, 0.03, 0.1, 0.2, 0.3, 0.5};
    const std::vector<double> diags{0.95, 0.95, 0.94, 0.92, 0.8, 0.5};
    const double chosen = select_dropout_rate(synthetic_sweep(rates, diags)).rate;
    EXPECT_EQ(chosen, 0.2);
    for (std::size_t keep = 4; keep < rates.size(); ++keep) {
        const std::vector<double> r(rates.begin(), rates.begin() + keep);
        const std::vector<double> d(diags.begin(), diags.begin() + keep);
        EXPECT_EQ(select_dropout_rate(synthetic_sweep(r, d)).rate, chosen) << keep;
    }
}

TEST(Selection, NeedsEnoughRatesAndABaseline) {
    EXPECT_THROW(select_dropout_rate(synthetic_sweep({0.0, 0.1}, {0.9, 0.9})), InvalidArgument);
    EXPECT_THROW(select_dropout_rate(synthetic_sweep({0.1, 0.2, 0.3}, {0.9, 0.9, 0.9})), InvalidArgument);
    EXPECT_THROW(select_dropout_rate(synthetic_sweep({0.0, 0.6, 0.7}, {0.9, 0.9, 0.9})), InvalidArgument);
    EXPECT_THROW(select_dropout_rate(synthetic_sweep({0.0, 0.1, 0.2}, {0.9, 0.9, 0.9}), 0.0), InvalidArgument);
    SweepResult broken = synthetic_sweep({0.0, 0.1, 0.2, 0.5}, {0.9, 0.9, 0.9, 0.9});
    broken.entries[2].error = "diverged";
    EXPECT_EQ(select_dropout_rate(broken).rate, 0.1);
}

// ------------------------------------------------------------ field scan

TEST(FieldScan, DeterministicModelHasNoVariance) {
    const NetworkParams params = toy_model(0.0, 2);
    const FieldScan scan = field_scan_2d(params, {}, 12, 20, RngStream(1));
    ASSERT_EQ(scan.cells.size(), 144u);
    EXPECT_NEAR(scan.xs.front(), -1.1, 1e-12);
    EXPECT_NEAR(scan.xs.back(), 1.1, 1e-12);
    for (const auto& c : scan.cells) {
        EXPECT_EQ(c.variance[1], 0.0);
    }
    const std::string csv = scan.to_csv();
    EXPECT_EQ(csv.rfind("x,y,mean_1,variance_1,proximity\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 145);
    const CsvTable t = scan.mean_table();
    EXPECT_EQ(t.header.front(), "y\\x");
    EXPECT_EQ(t.values.rows(), 12u);
    EXPECT_EQ(t.values(3, 5), scan.at(5, 3).mean[1]);
    const CsvTable back = parse_table(table_to_string(t));
    EXPECT_EQ(back.values.cols(), 12u);
}

TEST(FieldScan, DropoutScanIsReproducible) {
    const NetworkParams params = toy_model(0.2, 2);
    const FieldScan a = field_scan_2d(params, {}, 10, 15, RngStream(2), nullptr, 1);
    const FieldScan b = field_scan_2d(params, {}, 10, 15, RngStream(2), nullptr, 4);
    EXPECT_EQ(a.cells, b.cells);
    EXPECT_EQ(a.to_csv(), b.to_csv());
}

TEST(FieldScan, RejectsBadInputs) {
    NetworkConfig nc;
    EXPECT_THROW(field_scan_2d(init_params(nc), {}, 10, 5, RngStream(1)), DimensionError);
    nc.input_dim = 2;
    nc.num_classes = 2;
    EXPECT_THROW(field_scan_2d(init_params(nc), {}, 1, 5, RngStream(1)), InvalidArgument);
    EXPECT_THROW(field_scan_2d(init_params(nc), {1, 0, -1, 1}, 5, 5, RngStream(1)), InvalidArgument);
}

TEST(FieldScan, SeparationFollowsClassConnectivity) {
    EXPECT_TRUE(decision_boundary_separates(synthetic_scan(0.5), 0.3, 0.7));
    // Boundary outside the outer radius: the inner class reaches r > 0.7.
    EXPECT_FALSE(decision_boundary_separates(synthetic_scan(0.9), 0.3, 0.7));
    EXPECT_THROW(decision_boundary_separates(synthetic_scan(0.5), 0.0, 0.7), InvalidArgument);
    EXPECT_DOUBLE_EQ(mean_variance_in_band(synthetic_scan(0.5), 0.0, 0.3), 0.0);
    EXPECT_NEAR(mean_variance_in_band(synthetic_scan(0.5), 0.7, 1.0), 0.02, 1e-15);
}

// --------------------------------------------------------- severity grid

TEST(SeverityGrid, PanelsAndDiagnosisTable) {
    ChillerSynthConfig cfg;
    cfg.samples_per_condition = 40;
    cfg.operating_conditions = 1;
    const LabeledDataset full = gen_chiller(cfg, 11);
    const LabeledDataset train_raw = filter_severity(full, {0, 4});
    const LabeledDataset train_data = standardize(train_raw);
    const LabeledDataset test_data = standardize_with(gen_chiller(cfg, 12), *train_data.standardization);
    NetworkConfig nc;
    TrainConfig tc;
    tc.epochs = 30;
    tc.learning_rate = 3e-3;
    const NetworkParams base = train(nc, tc, train_data).params;
    nc.dropout_rate = 0.1;
    const NetworkParams mc = train(nc, tc, train_data).params;

    const SeverityGrid grid = severity_grid(base, mc, test_data, 30, RngStream(5));
    ASSERT_EQ(grid.panels.size(), 4u);
    for (const auto& panel : grid.panels) {
        ASSERT_EQ(panel.baseline.conditions.size(), 7u);
        EXPECT_EQ(panel.baseline.conditions[0], "NM");
        for (double v : panel.baseline.variance.values()) {
            EXPECT_EQ(v, 0.0);
        }
    }
    const SeverityPanel& sl4 = grid.panels[3];
    EXPECT_EQ(sl4.severity, 4);
    EXPECT_EQ(sl4.mc.conditions[1], "FWE-SL4");
    for (std::size_t r = 0; r < 7; ++r) {
        const std::size_t t = sl4.mc.true_labels[r];
        for (std::size_t c = 0; c < 7; ++c) {
            if (c != t) {
                EXPECT_GT(sl4.baseline.mean(r, t), sl4.baseline.mean(r, c));
            }
        }
    }
    ASSERT_EQ(grid.diagnosis.rows.size(), 12u);
    EXPECT_EQ(grid.diagnosis.rows[0].condition, "FWE-SL1");
    EXPECT_EQ(grid.diagnosis.rows[6].condition, "FWE-SL2");

    const CsvTable t = heatmap_table(sl4.mc, sl4.mc.mean, test_data.class_names);
    EXPECT_EQ(t.header.front(), "condition");
    EXPECT_EQ(t.header.size(), 8u);
    EXPECT_THROW(heatmap_table(sl4.mc, Matrix(2, 2), test_data.class_names), DimensionError);
}
