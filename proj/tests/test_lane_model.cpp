#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lanemap/error.hpp"
#include "lanemap/lane_model.hpp"

using namespace lanemap;

namespace {

Lane make_lane(std::string id, std::vector<GeoPoint> pts) {
    return Lane{std::move(id), "r", {}, std::move(pts)};
}

GeoTransform random_transform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (;;) {
        GeoTransform t{u(rng), u(rng), u(rng) * 50, u(rng), u(rng), u(rng) * 20};
        if (std::abs(t.determinant()) > 1e-6) return t;
    }
}

}  // namespace

TEST_SUITE("lane_model") {

TEST_CASE("geo_to_pixel on simple transforms") {
    const PixelPoint p = geo_to_pixel(GeoTransform{}, {2.0, 3.0});
    CHECK(p.x == doctest::Approx(2.0));
    CHECK(p.y == doctest::Approx(3.0));

    const PixelPoint q = geo_to_pixel(GeoTransform{0.5, 0, 10, 0, 0.5, 20}, {11.0, 21.0});
    CHECK(q.x == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("geo_to_pixel rejects a singular transform") {
    CHECK_THROWS_AS(geo_to_pixel(GeoTransform{1, 2, 0, 2, 4, 0}, {0, 0}), ValidationError);
}

TEST_CASE("pixel_to_geo applies the forward map") {
    const GeoPoint g = pixel_to_geo(GeoTransform{}, {5, 5});
    CHECK(g.lon == 5.0);
    CHECK(g.lat == 5.0);
    const GeoPoint h = pixel_to_geo(GeoTransform{0.001, 0, 31.0, 0, -0.001, 30.0}, {100, 100});
    CHECK(h.lon == doctest::Approx(31.1).epsilon(1e-12));
    CHECK(h.lat == doctest::Approx(29.9).epsilon(1e-12));
}

TEST_CASE("geo round trip over random transforms") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    double worst_geo = 0.0;
    double worst_px = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const GeoTransform t = random_transform(rng);
        const GeoPoint g{u(rng), u(rng) * 0.8};
        const GeoPoint back = pixel_to_geo(t, geo_to_pixel(t, g));
        worst_geo = std::max({worst_geo, std::abs(back.lon - g.lon), std::abs(back.lat - g.lat)});
        const PixelPoint p{u(rng) * 10, u(rng) * 10};
        const PixelPoint pb = geo_to_pixel(t, pixel_to_geo(t, p));
        worst_px = std::max({worst_px, std::abs(pb.x - p.x), std::abs(pb.y - p.y)});
    }
    CHECK(worst_geo < 1e-9);
    CHECK(worst_px < 1e-6);
}

TEST_CASE("lane length along the equator") {
    const double expected = kEarthRadiusM * std::numbers::pi / 180.0;
    CHECK(lane_length_m(make_lane("a", {{0, 0}, {1, 0}})) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(lane_length_m(make_lane("a", {{0, 0}, {1, 0}})) - 111194.9) < 1.0);
    CHECK(haversine_m({12.5, 41.9}, {12.5, 41.9}) == 0.0);
}

TEST_CASE("lane length is invariant under reversal") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (int i = 0; i < 100; ++i) {
        std::vector<GeoPoint> pts;
        for (int k = 0; k < 8; ++k) pts.push_back({31.2 + u(rng), 30.0 + u(rng)});
        Lane lane = make_lane("x", pts);
        std::reverse(pts.begin(), pts.end());
        CHECK(lane_length_m(lane) == doctest::Approx(lane_length_m(make_lane("x", pts))).epsilon(1e-12));
    }
}

TEST_CASE("map_stats counts and sums") {
    CHECK(map_stats(LaneMap{}).lane_count == 0);
    CHECK(map_stats(LaneMap{}).total_length_km == 0.0);

    LaneMap m{"three", {make_lane("a", {{0, 0}, {0.001, 0}}), make_lane("b", {{0, 0.001}, {0.002, 0.001}}),
                        make_lane("c", {{1, 1}, {1, 1.001}})}};
    const MapStats s = map_stats(m);
    CHECK(s.lane_count == 3);
    CHECK(s.vertex_count == 6);
    double sum = 0.0;
    for (const Lane& l : m.lanes) sum += haversine_m(l.vertices[0], l.vertices[1]);
    CHECK(s.total_length_km == doctest::Approx(sum / 1000.0).epsilon(1e-12));
}

TEST_CASE("map_stats is additive over disjoint maps") {
    LaneMap a{"a", {make_lane("1", {{0, 0}, {0.01, 0.01}})}};
    LaneMap b{"b", {make_lane("2", {{1, 1}, {1.01, 1}, {1.02, 1.01}})}};
    LaneMap u{"u", {a.lanes[0], b.lanes[0]}};
    MapStats sum = map_stats(a);
    sum += map_stats(b);
    const MapStats whole = map_stats(u);
    CHECK(whole.lane_count == sum.lane_count);
    CHECK(whole.vertex_count == sum.vertex_count);
    CHECK(whole.total_length_km == doctest::Approx(sum.total_length_km).epsilon(1e-12));
}

TEST_CASE("lane validation") {
    CHECK_THROWS_AS(validate(make_lane("short", {{0, 0}})), ValidationError);
    CHECK_THROWS_AS(validate(make_lane("dup", {{0, 0}, {1, 1}, {1, 1}})), ValidationError);
    CHECK_THROWS_AS(validate(make_lane("range", {{0, 0}, {200, 0}})), ValidationError);
    CHECK_THROWS_AS(validate(make_lane("nan", {{0, 0}, {std::nan(""), 0}})), ValidationError);
    LaneMap twice{"m", {make_lane("a", {{0, 0}, {1, 1}}), make_lane("a", {{2, 2}, {3, 3}})}};
    CHECK_THROWS_WITH_AS(validate(twice), doctest::Contains("a"), ValidationError);
    CHECK_NOTHROW(validate(make_lane("ok", {{0, 0}, {1, 1}})));
}

TEST_CASE("attribute names round trip") {
    CHECK(parse_line_form(to_string(LineForm::Double)) == LineForm::Double);
    CHECK(parse_line_color(to_string(LineColor::Yellow)) == LineColor::Yellow);
    CHECK(parse_continuity(to_string(Continuity::Dash)) == Continuity::Dash);
    CHECK(to_string(Continuity::Solid) == "solid");
    CHECK_THROWS_AS(parse_line_color("red"), ValidationError);
}

TEST_CASE("project_lane clipping cases") {
    const GeoTransform t{};
    SUBCASE("inside") {
        const auto out = project_lane(t, make_lane("a", {{1, 1}, {5, 2}, {8, 8}}), 10, 10);
        REQUIRE(out.size() == 1);
        CHECK(out[0].size() == 3);
    }
    SUBCASE("outside") {
        CHECK(project_lane(t, make_lane("a", {{20, 20}, {30, 25}}), 10, 10).empty());
    }
    SUBCASE("crossing the right border") {
        const auto out = project_lane(t, make_lane("a", {{4, 2}, {14, 7}}), 10, 10);
        REQUIRE(out.size() == 1);
        REQUIRE(out[0].size() == 2);
        CHECK(out[0][1].x == 10.0);
        CHECK(out[0][1].y == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(out[0][0] == PixelPoint{4, 2});
    }
    SUBCASE("leave and re-enter splits the lane") {
        const auto out = clip_polyline({{2, 2}, {15, 2}, {15, 8}, {2, 8}}, 10, 10);
        REQUIRE(out.size() == 2);
        CHECK(out[0].front() == PixelPoint{2, 2});
        CHECK(out[0].back() == PixelPoint{10, 2});
        CHECK(out[1].front() == PixelPoint{10, 8});
        CHECK(out[1].back() == PixelPoint{2, 8});
    }
}

TEST_CASE("clipped vertices stay in bounds") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-50.0, 150.0);
    for (int i = 0; i < 300; ++i) {
        Polyline poly;
        for (int k = 0; k < 6; ++k) poly.push_back({u(rng), u(rng)});
        for (const Polyline& piece : clip_polyline(poly, 100, 80)) {
            CHECK(piece.size() >= 2);
            for (const PixelPoint& p : piece) {
                CHECK(p.x >= 0.0);
                CHECK(p.x <= 100.0);
                CHECK(p.y >= 0.0);
                CHECK(p.y <= 80.0);
            }
        }
    }
}

}
