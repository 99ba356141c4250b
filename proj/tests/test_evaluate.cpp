#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "bump/evaluate.hpp"
#include "bump/rng.hpp"

using namespace bump;
using namespace bump::evaluate;
namespace fs = std::filesystem;

namespace {

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(equal), the
// probabilistic definition of AUC, as an independent oracle.
double mann_whitney(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("accuracy counts matches") {
    CHECK(accuracy({1, 0, 1, 1}, {1, 0, 0, 1}) == doctest::Approx(0.75));
    CHECK(accuracy({0, 0}, {1, 1}) == 0.0);
    CHECK_THROWS_AS(accuracy({1}, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("a hand-worked four-point ROC") {
    // positives score {0.9, 0.8}, negatives {0.85, 0.7}
    const std::vector<double> scores{0.9, 0.85, 0.8, 0.7};
    const std::vector<int> labels{1, 0, 1, 0};
    const auto curve = roc(scores, labels);

    // (0,0) then one point per distinct score
    REQUIRE(curve.points.size() == 5);
    CHECK(curve.points[0].fpr == 0.0);
    CHECK(curve.points[0].tpr == 0.0);
    CHECK(curve.points[1].tpr == doctest::Approx(0.5));  // 0.9 in
    CHECK(curve.points[1].fpr == 0.0);
    CHECK(curve.points[2].tpr == doctest::Approx(0.5));  // 0.85 in
    CHECK(curve.points[2].fpr == doctest::Approx(0.5));
    CHECK(curve.points[3].tpr == doctest::Approx(1.0));  // 0.8 in
    CHECK(curve.points[3].fpr == doctest::Approx(0.5));
    CHECK(curve.points[4].tpr == 1.0);
    CHECK(curve.points[4].fpr == 1.0);

    // area: 0.5*0 quadrant + .5x.5 square + triangle-free step = 0.75
    CHECK(auc(curve) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(auc(curve) == doctest::Approx(mann_whitney(scores, labels)).epsilon(1e-12));
}

TEST_CASE("perfect separation gives AUC 1 through the (0,1) corner") {
    const std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    const auto curve = roc(scores, labels);
    CHECK(auc(curve) == doctest::Approx(1.0).epsilon(1e-14));
    bool corner = false;
    for (const auto& p : curve.points)
        if (p.fpr == 0.0 && p.tpr == 1.0) corner = true;
    CHECK(corner);
}

TEST_CASE("all-equal scores collapse to the chance diagonal") {
    const std::vector<double> scores{0.5, 0.5, 0.5, 0.5};
    const std::vector<int> labels{1, 0, 1, 0};
    const auto curve = roc(scores, labels);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[1].fpr == 1.0);
    CHECK(curve.points[1].tpr == 1.0);
    CHECK(auc(curve) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("roc needs both classes") {
    CHECK_THROWS_AS(roc({0.4, 0.6}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(roc({0.4, 0.6}, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(roc({0.4}, {0, 1}), std::invalid_argument);
}

TEST_CASE("trapezoidal AUC equals the Mann-Whitney statistic") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 10 + rng.below(60);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores force plenty of exact ties
            scores[i] = std::floor(rng.uniform01() * 8.0) / 8.0;
            labels[i] = static_cast<int>(rng.below(2));
            (labels[i] ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const double a = auc(roc(scores, labels));
        const double mw = mann_whitney(scores, labels);
        CHECK(std::abs(a - mw) < 1e-12);
    }
}

TEST_CASE("AUC is invariant under monotone score transforms") {
    Rng rng(7);
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        scores[i] = rng.uniform01();
        labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    std::vector<double> squashed(50);
    for (std::size_t i = 0; i < 50; ++i)
        squashed[i] = 1.0 / (1.0 + std::exp(-6.0 * (scores[i] - 0.5)));
    CHECK(auc(roc(scores, labels)) ==
          doctest::Approx(auc(roc(squashed, labels))).epsilon(1e-12));
}

TEST_CASE("confusion matrix at a threshold") {
    const std::vector<double> scores{0.9, 0.6, 0.4, 0.2};
    const std::vector<int> labels{1, 0, 1, 0};
    const auto c = confusion_at(scores, labels, 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);

    // threshold semantics: score exactly at the threshold predicts positive
    const auto c2 = confusion_at(scores, labels, 0.9);
    CHECK(c2.tp == 1);
    CHECK(c2.fp == 0);

    const auto c3 = confusion_at(scores, labels, 0.0);
    CHECK(c3.tp + c3.fp == 4);
}

TEST_CASE("threshold sweep rows are monotone in the right direction") {
    Rng rng(9);
    std::vector<double> scores(80);
    std::vector<int> labels(80);
    for (std::size_t i = 0; i < 80; ++i) {
        labels[i] = static_cast<int>(rng.below(2));
        scores[i] = 0.3 * rng.uniform01() + 0.5 * labels[i];
    }
    labels[0] = 0;
    labels[1] = 1;

    const auto rows = threshold_sweep(scores, labels);
    REQUIRE(rows.size() >= 2);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].threshold < rows[i - 1].threshold);
        // lowering the threshold can only let more through
        CHECK(rows[i].tpr >= rows[i - 1].tpr);
        CHECK(rows[i].fpr >= rows[i - 1].fpr);
    }
    CHECK(rows.back().tpr == 1.0);
    CHECK(rows.back().fpr == 1.0);

    // explicit thresholds, including one above every score
    const auto fixed = threshold_sweep(scores, labels, {2.0, 0.5, 0.0});
    REQUIRE(fixed.size() == 3);
    CHECK(fixed[0].tpr == 0.0);
    CHECK(fixed[0].fpr == 0.0);
    CHECK(fixed[0].precision == 1.0);
    CHECK(fixed[2].tpr == 1.0);
    CHECK(fixed[2].fpr == 1.0);
}

TEST_CASE("ROC and AUC exports have the documented layout") {
    const std::vector<double> scores{0.9, 0.85, 0.8, 0.7};
    const std::vector<int> labels{1, 0, 1, 0};
    const auto curve = roc(scores, labels);

    const auto csv_path = fs::temp_directory_path() / "evaluate_roc.csv";
    write_roc_csv(curve, csv_path);
    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "threshold,fpr,tpr");
    std::getline(in, line);
    CHECK(line == "inf,0,0");
    std::size_t rows = 1;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == curve.points.size());
    fs::remove(csv_path);

    const auto svg_path = fs::temp_directory_path() / "evaluate_roc.svg";
    write_roc_svg(curve, svg_path, "test curve");
    std::ifstream svg(svg_path);
    std::stringstream buf;
    buf << svg.rdbuf();
    const auto text = buf.str();
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(text.find("test curve") != std::string::npos);
    CHECK(text.find("polyline") != std::string::npos);
    fs::remove(svg_path);

    const auto table_path = fs::temp_directory_path() / "evaluate_auc.csv";
    write_auc_table_csv({{"fc2", 0.9981}, {"cnn", 0.9995}}, table_path);
    std::ifstream table(table_path);
    std::getline(table, line);
    CHECK(line == "model,auc");
    std::getline(table, line);
    CHECK(line == "fc2,0.9981");
    std::getline(table, line);
    CHECK(line == "cnn,0.9995");
    fs::remove(table_path);
}
