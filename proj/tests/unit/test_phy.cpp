#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "prbslice/error.hpp"
#include "prbslice/phy.hpp"

namespace prbslice {
namespace {

TEST(McsTable, BundledRowsMatchStandard) {
    const auto& t = McsTable::bundled();
    ASSERT_EQ(t.rows().size(), 29u);
    EXPECT_EQ(t.row(0).code_rate_x1024, 120);
    EXPECT_EQ(t.row(6).code_rate_x1024, 449);
    EXPECT_EQ(t.row(9).modulation, Modulation::QPSK);
    EXPECT_EQ(t.row(10).modulation, Modulation::QAM16);
    EXPECT_EQ(t.row(17).modulation, Modulation::QAM64);
    EXPECT_EQ(t.row(28).code_rate_x1024, 948);
    EXPECT_EQ(t.row(28).qm, 6);
}

TEST(McsTable, LoadsShippedFileIdenticalToBundled) {
    const auto t = McsTable::load(PRBSLICE_TEST_DATA_DIR "/mcs_table_64qam.csv");
    const auto& b = McsTable::bundled();
    for (int i = 0; i < 29; ++i) {
        EXPECT_EQ(t.row(i).code_rate_x1024, b.row(i).code_rate_x1024);
        EXPECT_EQ(t.row(i).qm, b.row(i).qm);
    }
}

TEST(McsTable, RejectsInconsistentRows) {
    std::ostringstream csv;
    csv << "index,modulation,qm,code_rate_x1024\n";
    for (int i = 0; i < 29; ++i) csv << i << ",QPSK,4,100\n";
    std::istringstream in(csv.str());
    EXPECT_THROW(McsTable::parse_csv(in), ConfigError);

    std::istringstream short_in("index,modulation,qm,code_rate_x1024\n0,QPSK,2,120\n");
    EXPECT_THROW(McsTable::parse_csv(short_in), ConfigError);

    std::istringstream bad_header("idx,mod,qm,rate\n");
    EXPECT_THROW(McsTable::parse_csv(bad_header), ConfigError);
}

TEST(McsParams, ProductsOfOrderAndRate) {
    EXPECT_DOUBLE_EQ(mcs_params(28).spectral_efficiency(), 6.0 * 948.0 / 1024.0);
    EXPECT_DOUBLE_EQ(mcs_params(6).spectral_efficiency(), 2.0 * 449.0 / 1024.0);
    EXPECT_EQ(mcs_params(16).modulation, Modulation::QAM16);
}

TEST(McsParams, OutsideReachableRangeThrows) {
    EXPECT_THROW(mcs_params(5), DomainError);
    EXPECT_THROW(mcs_params(29), DomainError);
    EXPECT_THROW(mcs_params(-1), DomainError);
}

TEST(McsParams, EfficiencyNonDecreasingExceptAtSixteen) {
    // The table itself steps down slightly from 16QAM 658 to 64QAM 438.
    for (int m = kMinMcs; m < kMaxMcs; ++m) {
        if (m == 16) {
            EXPECT_GT(mcs_params(16).spectral_efficiency(), mcs_params(17).spectral_efficiency());
            continue;
        }
        EXPECT_LE(mcs_params(m).spectral_efficiency(), mcs_params(m + 1).spectral_efficiency()) << m;
    }
}

TEST(Modulation, NamesRoundTrip) {
    for (auto m : {Modulation::QPSK, Modulation::QAM16, Modulation::QAM64}) {
        EXPECT_EQ(parse_modulation(to_string(m)), m);
    }
    EXPECT_EQ(bits_per_symbol(Modulation::QAM64), 6);
    EXPECT_THROW(parse_modulation("256QAM"), ConfigError);
}

TEST(DutyCycle, DefaultPatternIsFiftySixOverOneForty) {
    EXPECT_DOUBLE_EQ(duty_cycle(RadioConfig{}), (7.0 * 14 + 6) / (10.0 * 14));
}

TEST(RadioConfig, ValidateRejectsBadFields) {
    RadioConfig c;
    EXPECT_NO_THROW(c.validate());
    c.prb_total = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RadioConfig{};
    c.overhead = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RadioConfig{};
    c.prx_min_db = -5.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ReceivedPower, HandEvaluatedPoints) {
    const RadioConfig cfg;
    const auto at1 = received_power(query_at(1.0, cfg), cfg);
    EXPECT_NEAR(at1.raw_db, -19.726050015345734, 1e-9);
    EXPECT_FALSE(at1.was_clipped());

    const auto close = received_power(query_at(0.106, cfg), cfg);
    EXPECT_NEAR(close.raw_db, -0.23216732064113899, 1e-9);
    EXPECT_DOUBLE_EQ(close.clipped_db, -7.0);

    const auto far = received_power(query_at(50.0, cfg), cfg);
    EXPECT_LT(far.raw_db, -23.0);
    EXPECT_DOUBLE_EQ(far.clipped_db, -23.0);
}

TEST(ReceivedPower, StrictlyDecreasingAndBounded) {
    const RadioConfig cfg;
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 0.01; d < 20.0; d *= 1.1) {
        const auto r = received_power(query_at(d, cfg), cfg);
        EXPECT_LT(r.raw_db, prev);
        prev = r.raw_db;
        EXPECT_GE(r.clipped_db, cfg.prx_min_db);
        EXPECT_LE(r.clipped_db, cfg.prx_max_db);
    }
}

TEST(ReceivedPower, NonPositiveDistanceThrows) {
    const RadioConfig cfg;
    EXPECT_THROW(received_power(query_at(0.0, cfg), cfg), DomainError);
    EXPECT_THROW(received_power(query_at(-1.0, cfg), cfg), DomainError);
}

TEST(DistanceForPower, InvertsLinkBudget) {
    EXPECT_NEAR(distance_for_power_km(-7.0, 83.84, 3600.0), 0.23104549197296448, 1e-12);
    for (double p : {-23.0, -15.0, -7.0}) {
        const double d = distance_for_power_km(p, 83.84, 3600.0);
        EXPECT_NEAR(83.84 - free_space_loss_db(d, 3600.0), p, 1e-9);
    }
}

}  // namespace
}  // namespace prbslice
