#include <doctest.h>

#include <limits>

#include "pcc/core.hpp"
#include "pcc/partition.hpp"

using namespace pcc;

namespace {

Matrix column(std::initializer_list<double> v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

LabeledSet labeled_1d(std::initializer_list<double> xs, std::vector<int> groups, std::vector<int> labels) {
    LabeledSet s;
    s.x = column(xs);
    s.group = std::move(groups);
    s.label = std::move(labels);
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) s.source.push_back(i);
    return s;
}

}  // namespace

TEST_CASE("odds ratio") {
    CHECK(odds_ratio(0.5, 0.5) == 1.0);
    CHECK(odds_ratio(0.0, 0.0) == 1.0);
    CHECK(odds_ratio(1.0, 1.0) == 1.0);
    CHECK(odds_ratio(0.8, 0.5) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(odds_ratio(0.5, 0.8) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(odds_ratio(1.0, 0.5) == std::numeric_limits<double>::infinity());
    CHECK(odds_ratio(0.0, 0.5) == 0.0);
    CHECK(odds_ratio(0.5, 1.0) == 0.0);
}

TEST_CASE("restrict to a cluster") {
    const PartitionModel p(column({0.0, 10.0}));
    const LabeledSet near0 = labeled_1d({0.1, -1.0, 2.0}, {0, 0, 1}, {1, 0, 1});
    const LabeledSet same = restrict(near0, p, 0);
    CHECK(same.x == near0.x);
    CHECK(same.label == near0.label);
    CHECK(restrict(near0, p, 1).empty());

    const LabeledSet mixed = labeled_1d({1.0, 9.0, 4.0, 6.0}, {0, 1, 0, 1}, {0, 1, 1, 0});
    for (int k = 0; k < 2; ++k) {
        const LabeledSet r = restrict(mixed, p, k);
        std::vector<double> expected;
        for (Eigen::Index i = 0; i < mixed.size(); ++i) {
            const double x = mixed.x(i, 0);
            const int nearest = std::abs(x - 0.0) <= std::abs(x - 10.0) ? 0 : 1;
            if (nearest == k) expected.push_back(x);
        }
        REQUIRE(r.size() == static_cast<Eigen::Index>(expected.size()));
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(r.x(static_cast<Eigen::Index>(i), 0) == expected[i]);
    }
}

TEST_CASE("restrict to a cell") {
    const PartitionModel p(column({0.0, 10.0}));
    UnlabeledSet u;
    u.x = column({0.5, 1.0});
    u.group = {3, 3};
    u.source = {0, 1};
    CHECK(restrict_cell(u, p, {3, 0}).x == u.x);
    CHECK(restrict_cell(u, p, {4, 0}).empty());

    UnlabeledSet mixed;
    mixed.x = column({1, 9, 2, 8, 3, 7});
    mixed.group = {0, 0, 1, 1, 0, 1};
    mixed.source = {0, 1, 2, 3, 4, 5};
    for (int g = 0; g < 2; ++g)
        for (int k = 0; k < 2; ++k) {
            const UnlabeledSet r = restrict_cell(mixed, p, {g, k});
            std::vector<std::int64_t> expected;
            for (Eigen::Index i = 0; i < mixed.size(); ++i)
                if (mixed.group[static_cast<std::size_t>(i)] == g && (mixed.x(i, 0) < 5.0 ? 0 : 1) == k)
                    expected.push_back(i);
            CHECK(r.source == expected);
        }
}

TEST_CASE("group holdout split") {
    std::vector<int> groups;
    for (int g = 0; g < 10; ++g) groups.push_back(g);
    const auto [train, hold] = split_group_ids(groups, 0.2, 11);
    CHECK(train.size() == 8);
    CHECK(hold.size() == 2);
    const auto again = split_group_ids(groups, 0.2, 11);
    CHECK(again.first == train);
    CHECK(again.second == hold);

    const std::vector<int> five{0, 1, 2, 3, 4};
    CHECK(split_group_ids(five, 0.2, 3).second.size() == 1);

    const LabeledSet s = labeled_1d({1, 2, 3, 4, 5, 6}, {0, 0, 1, 2, 3, 4}, {0, 1, 0, 1, 0, 1});
    const auto [a, b] = split_groups_holdout(s, 0.2, 5);
    CHECK(a.size() + b.size() == s.size());
    for (int g : b.group)
        for (int h : a.group) CHECK(g != h);
}

TEST_CASE("group table interns in order of appearance") {
    GroupTable t;
    CHECK(t.intern("ca") == 0);
    CHECK(t.intern("ny") == 1);
    CHECK(t.intern("ca") == 0);
    CHECK(t.find("tx") == -1);
    CHECK(GroupTable::numbered(3).name(2) == "2");
}

TEST_CASE("derived seeds differ by stream and are stable") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(9, 4) == derive_seed(9, 4));
}

TEST_CASE("validation rejects bad data") {
    LabeledSet s = labeled_1d({1, 2}, {0, 0}, {0, 2});
    CHECK_THROWS_AS(s.validate(), DataError);
    s.label = {0, 1};
    s.x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(s.validate(), DataError);
}
