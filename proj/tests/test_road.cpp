#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "platoon/road.hpp"

using namespace platoon;

TEST_CASE("two-row csv gives a linear ramp") {
  std::stringstream csv;
  csv << "s_m,altitude_m,vmin_mps,vmax_mps\n";
  csv << "0,0,19,23.6\n";
  csv << "1000,10,,\n";
  const RoadProfile road = load_road(csv);
  CHECK(road.length_m() == doctest::Approx(1000.0));
  CHECK(road.slope_at(1.0) == doctest::Approx(std::atan(10.0 / 1000.0)));
  CHECK(road.slope_at(999.0) == doctest::Approx(std::atan(0.01)));
  CHECK(road.altitude_at(0.0) == doctest::Approx(0.0));
  CHECK(road.altitude_at(1000.0) == doctest::Approx(10.0));
  CHECK(road.vmin_at(500.0) == doctest::Approx(19.0));
  CHECK(road.vmax_at(500.0) == doctest::Approx(23.6));
}

TEST_CASE("duplicate position fails validation") {
  std::stringstream csv;
  csv << "0,0\n500,5\n500,6\n1000,10\n";
  CHECK_THROWS_AS(load_road(csv), std::invalid_argument);
}

TEST_CASE("malformed row reports its line number") {
  std::stringstream csv;
  csv << "s_m,altitude_m\n0,0\nbogus,1\n";
  try {
    load_road(csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("long file round-trips altitude exactly at sample points") {
  // 45 km at 1 m sampling; altitudes from a smooth generator frozen here.
  std::stringstream csv;
  csv << "s_m,altitude_m\n";
  const auto alt = [](double s) {
    return 25.0 * std::sin(s / 2500.0) + 10.0 * std::sin(s / 707.0);
  };
  const int n = 45000;
  for (int i = 0; i <= n; ++i) csv << i << "," << std::setprecision(17) << alt(i) << "\n";
  const RoadProfile road = load_road(csv);
  CHECK(road.length_m() == doctest::Approx(45000.0));
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pick(0, n);
  for (int k = 0; k < 500; ++k) {
    const int i = pick(rng);
    CHECK(road.altitude_at(i) == doctest::Approx(alt(i)).epsilon(1e-12));
  }
}

TEST_CASE("positions are rebased to zero") {
  std::stringstream csv;
  csv << "100,5\n300,7\n";
  const RoadProfile road = load_road(csv);
  CHECK(road.length_m() == doctest::Approx(200.0));
  CHECK(road.altitude_at(0.0) == doctest::Approx(5.0));
}

TEST_CASE("slope queries outside the domain throw") {
  const RoadProfile road = synth_flat(100.0);
  CHECK_THROWS_AS(road.slope_at(-1.0), std::domain_error);
  CHECK_THROWS_AS(road.altitude_at(100.5), std::domain_error);
}

TEST_CASE("synthetic hill geometry") {
  SUBCASE("only an approach gives a flat road") {
    const RoadProfile road = synth_hill(100, 0, 0, 0, 0, 0, 0);
    CHECK(road.length_m() == doctest::Approx(100.0));
    CHECK(road.slope_at(50.0) == doctest::Approx(0.0));
  }
  SUBCASE("symmetric hill ends at the start altitude") {
    const RoadProfile road = synth_hill(500, 1000, 0.03, 0, 1000, -0.03, 500);
    CHECK(road.altitude_at(road.length_m()) == doctest::Approx(0.0));
  }
  SUBCASE("plateau altitude is climb length times grade") {
    const RoadProfile road = synth_hill(0, 1000, 0.04, 500, 0, 0, 0);
    CHECK(road.altitude_at(1250.0) == doctest::Approx(40.0));
    CHECK(road.slope_at(1250.0) == doctest::Approx(0.0));
  }
}

TEST_CASE("classify_steep on canonical grades") {
  const VehicleParams truck{};  // 40 t defaults
  SUBCASE("flat road is never steep") {
    // Steady power at 22 m/s: (F_r + F_d)*v = (1177.2 + 1778.9) * 22 = 65 kW.
    const RoadProfile road = synth_flat(2000.0);
    CHECK(classify_steep(road, truck, 22.0).empty());
  }
  SUBCASE("+5% grade exceeds max power everywhere") {
    // Gravity power m*g*sin(atan(0.05))*22 = 431 kW > 298 kW.
    const RoadProfile road = synth_ramp(2000.0, 0.05);
    const auto segs = classify_steep(road, truck, 22.0);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].kind == SteepKind::UphillPowerLimited);
    CHECK(segs[0].start_m == doctest::Approx(0.0));
    CHECK(segs[0].end_m == doctest::Approx(2000.0));
  }
  SUBCASE("-5% grade requires braking everywhere") {
    const RoadProfile road = synth_ramp(2000.0, -0.05);
    const auto segs = classify_steep(road, truck, 22.0);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].kind == SteepKind::DownhillBrakingRequired);
    CHECK(steep_fraction(road, truck, 22.0) == doctest::Approx(1.0));
  }
  SUBCASE("v_ref -> 0 yields no power-limited uphills") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> grade(-0.06, 0.06);
    for (int trial = 0; trial < 20; ++trial) {
      const RoadProfile road = synth_ramp(1000.0, grade(rng));
      for (const auto& seg : classify_steep(road, truck, 1e-3))
        CHECK(seg.kind != SteepKind::UphillPowerLimited);
    }
  }
}

TEST_CASE("gravity work over a closed altitude loop cancels") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> g(0.01, 0.05), len(300.0, 1500.0), mass(20e3, 60e3);
  for (int trial = 0; trial < 25; ++trial) {
    const double up = g(rng), l1 = len(rng);
    const double down = -g(rng);
    const double l2 = up * l1 / -down;  // closes the loop at a sane grade
    const RoadProfile road = synth_hill(200, l1, up, 100, l2, down, 200);
    REQUIRE(road.altitude_at(road.length_m()) == doctest::Approx(0.0).epsilon(1e-9));
    const double m = mass(rng);
    // Slope-induced gravity work, integrated exactly per linear segment.
    double work = 0.0;
    const auto& samples = road.samples();
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      const double len = samples[i + 1].s_m - samples[i].s_m;
      work += m * 9.81 * road.sin_slope_at(samples[i].s_m) * len;
    }
    // sin(atan(.)) projection leaves a second-order residual in the grades.
    const double climb = m * 9.81 * up * l1;
    const double tol = climb * std::max(up * up, down * down) + 1.0;
    CHECK(std::abs(work) < tol);
  }
}

TEST_CASE("speed limit segments are right-open and keyed by start") {
  std::stringstream csv;
  csv << "0,0,19,23.6\n1000,0,,\n2000,0,15,20\n3000,0,,\n";
  const RoadProfile road = load_road(csv);
  CHECK(road.vmax_at(1999.9) == doctest::Approx(23.6));
  CHECK(road.vmax_at(2000.0) == doctest::Approx(20.0));
  CHECK(road.vmax_at(3000.0) == doctest::Approx(20.0));
  CHECK(road.vmin_over(0.0, 3000.0) == doctest::Approx(15.0));
  CHECK(road.vmax_over(0.0, 3000.0) == doctest::Approx(23.6));
  CHECK(road.vmax_over(2100.0, 2900.0) == doctest::Approx(20.0));
}

TEST_CASE("random hilly generator hits the steep-fraction target") {
  const VehicleParams truck{};
  RandomHillySpec spec;
  spec.length_m = 8000.0;
  spec.target_steep_fraction = 0.23;
  spec.seed = 42;
  const RoadProfile road = synth_random_hilly(spec, truck);
  CHECK(road.length_m() == doctest::Approx(8000.0));
  const double frac = steep_fraction(road, truck, spec.v_ref_mps);
  CHECK(frac == doctest::Approx(0.23).epsilon(0.14));  // within 3 points
  CHECK(road.slope_at(10.0) == doctest::Approx(0.0));  // flat caps
  CHECK(road.slope_at(road.length_m() - 10.0) == doctest::Approx(0.0));
}

TEST_CASE("write/load round trip preserves breakpoint altitudes on the grid") {
  const RoadProfile road = synth_hill(500, 1000, 0.03, 250, 1000, -0.025, 500);
  std::stringstream csv;
  write_road_csv(road, csv, 25.0);
  const RoadProfile back = load_road(csv);
  CHECK(back.length_m() == doctest::Approx(road.length_m()));
  for (double s = 0.0; s <= road.length_m(); s += 25.0)
    CHECK(back.altitude_at(s) == doctest::Approx(road.altitude_at(s)).epsilon(1e-12));
}
