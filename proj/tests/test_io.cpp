#include "raycalib/error.hpp"
#include "raycalib/io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace raycalib;
using namespace testsupport;

TEST(SpecJson, RoundTripIsExact) {
    std::mt19937_64 rng(1);
    for (const auto &m : all_model_strings()) {
        const auto s = random_spec(ModelId::parse(m), rng);
        const auto text = dump_json(spec_to_json(s));
        EXPECT_EQ(spec_from_json(Json::parse(text)), s) << m;
    }
}

TEST(SpecJson, Schema) {
    CameraSpec s;
    s.model = ModelId::parse("kb:2");
    s.fx = 300;
    s.fy = 310;
    s.cx = 320;
    s.cy = 240;
    s.dist = {0.1, -0.01};
    s.width = 640;
    s.height = 480;
    const Json j = spec_to_json(s);
    EXPECT_EQ(j.at("model"), "kb:2");
    EXPECT_EQ(j.at("width"), 640);
    EXPECT_EQ(j.at("fy"), 310.0);
    EXPECT_EQ(j.at("dist").size(), 2u);
}

TEST(SpecJson, Errors) {
    auto kind_of = [](const std::string &text) {
        try {
            spec_from_json(Json::parse(text));
        } catch (const Error &e) {
            return e.kind();
        }
        return ErrorKind::EmptyInput;
    };
    EXPECT_EQ(kind_of(R"({"model": "pinhole", "width": 4})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"model": "ucm", "width": 4, "height": 4, "fx": 1, "fy": 1, "cx": 2, "cy": 2, "dist": []})"),
              ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"model": "acme", "width": 4, "height": 4, "fx": 1, "fy": 1, "cx": 2, "cy": 2})"),
              ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of(R"({"model": "pinhole", "width": "4", "height": 4, "fx": 1, "fy": 1, "cx": 2, "cy": 2})"),
              ErrorKind::ParseError);
}

TEST(ResultJson, CarriesDiagnostics) {
    CalibrationResult r;
    r.spec.model = ModelId::parse("ucm");
    r.spec.dist = {0.5};
    r.algebraic_spec = r.spec;
    r.gn_costs = {1e-3, 1e-5, 1e-6, 1e-6, 1e-6, 1e-6};
    r.active_bounds = {"ucm: xi >= 0"};
    const Json j = result_to_json(r);
    EXPECT_EQ(j.at("gn_costs").size(), 6u);
    EXPECT_EQ(j.at("active_bounds")[0], "ucm: xi >= 0");
    EXPECT_EQ(spec_from_json(j), r.spec);
}

TEST(Files, ReadWriteAndErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "raycalib_io_test";
    std::filesystem::remove_all(dir);
    CameraSpec s;
    s.width = s.height = 10;
    s.cx = s.cy = 5;
    write_spec(s, dir / "sub" / "spec.json");
    EXPECT_EQ(read_spec(dir / "sub" / "spec.json"), s);
    std::ofstream(dir / "bad.json") << "{ nope";
    try {
        read_spec(dir / "bad.json");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    }
    try {
        read_spec(dir / "none.json");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::FileNotFound);
    }
    std::filesystem::remove_all(dir);
}
