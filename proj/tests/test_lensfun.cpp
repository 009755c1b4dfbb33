#include "raycalib/error.hpp"
#include "raycalib/lensfun.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace raycalib;
using namespace testsupport;

namespace {

LensfunEntry equidistant_180_diagonal() {
    LensfunEntry e;
    e.model_kind = LensfunModelKind::Poly3;
    e.projection = LensProjection::Equidistant;
    e.coefficients = {0.0};
    e.focal_mm = 0.5 * std::hypot(36.0, 24.0) / (kPi / 2);
    return e;
}

} // namespace

TEST(Lensfun, DistortionPolynomials) {
    LensfunEntry e;
    e.focal_mm = 10;
    e.model_kind = LensfunModelKind::Poly3;
    e.coefficients = {0.1};
    EXPECT_NEAR(e.distort(0.5), 0.5 * (1 - 0.1 + 0.1 * 0.25), 1e-15);
    e.model_kind = LensfunModelKind::Poly5;
    e.coefficients = {0.1, -0.02};
    EXPECT_NEAR(e.distort(0.5), 0.5 * (1 + 0.1 * 0.25 - 0.02 * 0.0625), 1e-15);
    e.model_kind = LensfunModelKind::PTLens;
    e.coefficients = {0.01, -0.03, 0.02};
    EXPECT_NEAR(e.distort(0.5), 0.5 * (0.01 * 0.125 - 0.03 * 0.25 + 0.02 * 0.5 + 1 - 0.01 + 0.03 - 0.02), 1e-15);
    // Derivatives against central differences.
    for (auto kind : {LensfunModelKind::Poly3, LensfunModelKind::Poly5, LensfunModelKind::PTLens}) {
        e.model_kind = kind;
        e.coefficients.resize(kind == LensfunModelKind::Poly3 ? 1 : kind == LensfunModelKind::Poly5 ? 2 : 3, 0.05);
        double d;
        e.distort(0.7, &d);
        EXPECT_NEAR(d, (e.distort(0.7 + 1e-6) - e.distort(0.7 - 1e-6)) / 2e-6, 1e-8);
    }
}

TEST(Lensfun, IdentityEquidistantFisheye) {
    const auto fit = lensfun_to_eucm(equidistant_180_diagonal());
    EXPECT_LT(fit.residual_deg, 0.2);
    EXPECT_EQ(fit.newton_failures, 0u);
    // Independent check: compare the fitted map with the exact equidistant map on a coarse grid.
    const Camera cam(fit.spec);
    const double half_short = 0.5 * fit.spec.height, f_mm = equidistant_180_diagonal().focal_mm;
    double sum = 0.0;
    int n = 0;
    for (int v = 0; v < fit.spec.height; v += 97)
        for (int u = 0; u < fit.spec.width; u += 97) {
            const Pixel px(u + 0.5, v + 0.5);
            const Eigen::Vector2d m = px - fit.spec.principal_point();
            const double theta = m.norm() / half_short * 12.0 / f_mm;
            const double phi = std::atan2(m.y(), m.x());
            const Ray exact(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
            sum += angle_between(cam.unproject(px), exact) * 180.0 / kPi;
            ++n;
        }
    EXPECT_LT(sum / n, 0.2);
}

TEST(Lensfun, FittedParametersAlwaysInBounds) {
    std::mt19937_64 rng(1);
    const LensfunModelKind kinds[] = {LensfunModelKind::FisheyeEquisolid, LensfunModelKind::FisheyeEquidistant,
                                      LensfunModelKind::FisheyeOrthographic, LensfunModelKind::FisheyeStereographic,
                                      LensfunModelKind::Poly3, LensfunModelKind::Poly5, LensfunModelKind::PTLens};
    for (int trial = 0; trial < 60; ++trial) {
        LensfunEntry e;
        e.model_kind = kinds[trial % 7];
        switch (e.model_kind) {
        case LensfunModelKind::Poly3: e.coefficients = {uniform(rng, -0.05, 0.05)}; break;
        case LensfunModelKind::Poly5: e.coefficients = {uniform(rng, -0.05, 0.05), uniform(rng, -0.01, 0.01)}; break;
        case LensfunModelKind::PTLens:
            e.coefficients = {uniform(rng, -0.01, 0.01), uniform(rng, -0.03, 0.03), uniform(rng, -0.03, 0.03)};
            break;
        default: e.coefficients = {uniform(rng, -0.03, 0.03)};
        }
        e.projection = e.model_kind == LensfunModelKind::FisheyeEquisolid      ? LensProjection::Equisolid
                       : e.model_kind == LensfunModelKind::FisheyeEquidistant  ? LensProjection::Equidistant
                       : e.model_kind == LensfunModelKind::FisheyeOrthographic ? LensProjection::Orthographic
                       : e.model_kind == LensfunModelKind::FisheyeStereographic ? LensProjection::Stereographic
                                                                                : LensProjection::Rectilinear;
        e.focal_mm = uniform(rng, 8.0, 30.0);
        const auto fit = lensfun_to_eucm(e, {40, 50.0});
        EXPECT_GE(fit.alpha, 0.0);
        EXPECT_LE(fit.alpha, 1.0);
        EXPECT_GT(fit.beta, 0.0);
    }
}

TEST(Lensfun, JsonEntry) {
    const auto e = lensfun_entry_from_json(
        R"({"model_kind": "fisheye_equisolid", "coefficients": [0.01], "focal_mm": 16, "sensor_width_mm": 36, "sensor_height_mm": 24})");
    EXPECT_EQ(e.model_kind, LensfunModelKind::FisheyeEquisolid);
    EXPECT_EQ(e.projection, LensProjection::Equisolid);
    EXPECT_EQ(e.coefficients, std::vector<double>{0.01});
    const auto p = lensfun_entry_from_json(R"({"model_kind": "poly3", "coefficients": [0], "focal_mm": 9, "projection": "fisheye"})");
    EXPECT_EQ(p.projection, LensProjection::Equidistant);
}

TEST(Lensfun, JsonErrors) {
    auto kind_of = [](const std::string &text) {
        try {
            lensfun_entry_from_json(text);
        } catch (const Error &e) {
            return e.kind();
        }
        return ErrorKind::EmptyInput;
    };
    EXPECT_EQ(kind_of("{not json"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"model_kind": "acm", "focal_mm": 9})"), ErrorKind::UnsupportedModelKind);
    EXPECT_EQ(kind_of(R"({"model_kind": "poly5", "coefficients": [0.1], "focal_mm": 9})"), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of(R"({"model_kind": "poly3", "coefficients": [0.1]})"), ErrorKind::ParseError);
}

TEST(Lensfun, XmlDatabase) {
    const std::string xml = R"(<lensdatabase version="1">
  <lens>
    <maker>Nikon</maker>
    <model>Nikkor 16mm f/2.8D AF Fisheye</model>
    <mount>Nikon F AF</mount>
    <cropfactor>1.0</cropfactor>
    <type>fisheye_equisolid</type>
    <calibration>
      <distortion model="poly3" focal="16" k1="-0.0123"/>
      <tca model="poly3" focal="16" vr="1.0" vb="1.0"/>
    </calibration>
  </lens>
  <lens>
    <maker>Generic</maker>
    <model>Zoom</model>
    <cropfactor>1.5</cropfactor>
    <aspect-ratio>3:2</aspect-ratio>
    <calibration>
      <distortion model="ptlens" focal="18" a="0.01" b="-0.03" c="0.02"/>
      <distortion model="poly5" focal="35" k1="-0.01" k2="0.002"/>
    </calibration>
  </lens>
</lensdatabase>)";
    const auto entries = lensfun_entries_from_xml(xml);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].projection, LensProjection::Equisolid);
    EXPECT_EQ(entries[0].model_kind, LensfunModelKind::Poly3);
    EXPECT_EQ(entries[0].coefficients, std::vector<double>{-0.0123});
    EXPECT_NEAR(entries[0].sensor_width_mm, 36.0, 1e-12);
    EXPECT_EQ(entries[1].model_kind, LensfunModelKind::PTLens);
    EXPECT_NEAR(entries[1].sensor_width_mm, 24.0, 1e-12);
    EXPECT_NEAR(entries[1].sensor_height_mm, 16.0, 1e-12);
    EXPECT_EQ(entries[2].coefficients, (std::vector<double>{-0.01, 0.002}));
    EXPECT_THROW(lensfun_entries_from_xml("<lensdatabase><lens>"), Error);
}

TEST(Lensfun, ReadDispatchesOnContent) {
    const auto dir = std::filesystem::temp_directory_path() / "raycalib_lensfun_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "a.json") << R"({"model_kind": "fisheye_equidistant", "focal_mm": 8})";
        std::ofstream(dir / "b.xml")
            << R"(<lensdatabase><lens><type>fisheye</type><calibration><distortion model="poly3" focal="8" k1="0"/></calibration></lens></lensdatabase>)";
    }
    EXPECT_EQ(read_lensfun_entry(dir / "a.json").projection, LensProjection::Equidistant);
    EXPECT_EQ(read_lensfun_entry(dir / "b.xml").projection, LensProjection::Equidistant);
    EXPECT_THROW(read_lensfun_entry(dir / "missing.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST(Lensfun, EquisolidFullFrameFisheye) {
    // A 16 mm full-frame equisolid fisheye lands in the region the real-lens sample occupies.
    LensfunEntry e;
    e.model_kind = LensfunModelKind::FisheyeEquisolid;
    e.projection = LensProjection::Equisolid;
    e.focal_mm = 16.0;
    const auto fit = lensfun_to_eucm(e);
    EXPECT_GT(fit.alpha, 0.5);
    EXPECT_LT(fit.alpha, 0.8);
    EXPECT_GT(fit.beta, 0.5);
    EXPECT_LT(fit.beta, 2.0);
    EXPECT_LT(fit.residual_deg, 0.2);
}
