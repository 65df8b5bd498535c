// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "unit/support.hpp"

#include <splatdepth/io.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace splatdepth {
namespace {

namespace fs = std::filesystem;
using test::relErr;
using test::thrownKind;

std::string
slurp(const fs::path &p) {
    std::ifstream      in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void
spit(const fs::path &p, const std::string &text) {
    std::ofstream(p, std::ios::binary) << text;
}

// Hand-rolled binary PLY writer: `names` are float properties, `rows` the
// raw values per vertex.
void
writeRawPly(const fs::path &p, const std::vector<std::string> &names,
            const std::vector<std::vector<float>> &rows, const std::string &format = "binary_little_endian") {
    std::ofstream out(p, std::ios::binary);
    out << "ply\nformat " << format << " 1.0\ncomment made by hand\nelement vertex " << rows.size() << "\n";
    for (const auto &n : names) {
        out << "property float " << n << "\n";
    }
    out << "end_header\n";
    for (const auto &row : rows) {
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
}

const std::vector<std::string> kMinimalFields = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                                                 "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                                                 "rot_2", "rot_3"};

TEST(SplatPly, ActivationMaps) {
    const auto dir = test::scratchDir();
    writeRawPly(dir / "one.ply", kMinimalFields,
                {{1, 2, 3, 0.1f, 0.2f, 0.3f, 0, 0, std::log(2.0f), -1, 2, 0, 0, 0}});
    const auto scene = io::loadSplatPly(dir / "one.ply");
    ASSERT_EQ(scene.splats.size(), 1u);
    EXPECT_EQ(scene.shDegree, 0);
    const auto &g = scene.splats[0];
    EXPECT_EQ(g.center, Vec3(1, 2, 3));
    EXPECT_EQ(g.opacity, 0.5);
    EXPECT_EQ(g.scales.x(), 1.0);
    EXPECT_NEAR(g.scales.y(), 2.0, 1e-6);
    EXPECT_NEAR(g.scales.z(), std::exp(-1.0), 1e-7);
    EXPECT_EQ(g.rotation.w(), 1.0); // (2, 0, 0, 0) normalised
    EXPECT_NEAR(g.color.dc().y(), 0.2, 1e-7);
}

TEST(SplatPly, RoundTripAllShDegrees) {
    const auto dir = test::scratchDir();
    synth::Rng rng(101);
    for (int degree = 0; degree <= 3; ++degree) {
        std::vector<Gaussian3D> scene;
        for (int i = 0; i < 25; ++i) {
            Gaussian3D g;
            g.center   = Vec3::Random() * 5;
            g.rotation = synth::randomRotation(rng);
            g.scales   = Vec3(test::uniform(rng, 1e-3, 2), test::uniform(rng, 1e-3, 2), test::uniform(rng, 1e-3, 2));
            g.opacity  = test::uniform(rng, 0.01, 0.99);
            g.color    = ShCoefficients::withDegree(degree);
            for (auto &c : g.color.coeffs) {
                c = Vec3::Random();
            }
            scene.push_back(g);
        }
        const auto path = dir / ("deg" + std::to_string(degree) + ".ply");
        io::saveSplatPly(scene, path);
        const auto loaded = io::loadSplatPly(path);
        EXPECT_EQ(loaded.shDegree, degree);
        EXPECT_EQ(loaded.sourcePath, path.string());
        ASSERT_EQ(loaded.splats.size(), scene.size());
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const auto &a = scene[i], &b = loaded.splats[i];
            for (int k = 0; k < 3; ++k) {
                EXPECT_LE(relErr(a.center[k], b.center[k]), 1e-6);
                EXPECT_LE(relErr(a.scales[k], b.scales[k]), 1e-6);
            }
            EXPECT_LE(relErr(a.opacity, b.opacity), 1e-6);
            EXPECT_LE(std::min((a.rotation.coeffs() - b.rotation.coeffs()).norm(),
                               (a.rotation.coeffs() + b.rotation.coeffs()).norm()),
                      1e-6);
            ASSERT_EQ(a.color.coeffs.size(), b.color.coeffs.size());
            for (std::size_t k = 0; k < a.color.coeffs.size(); ++k) {
                EXPECT_LE((a.color.coeffs[k] - b.color.coeffs[k]).norm(), 1e-6);
            }
        }
        // Writers are deterministic.
        io::saveSplatPly(scene, dir / "again.ply");
        EXPECT_EQ(slurp(path), slurp(dir / "again.ply"));
    }
}

TEST(SplatPly, RestCoefficientsUseChannelMajorLayout) {
    const auto dir   = test::scratchDir();
    auto       names = kMinimalFields;
    std::vector<float> row{0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0};
    for (int i = 0; i < 9; ++i) {
        names.insert(names.begin() + 6 + i, "f_rest_" + std::to_string(i));
        row.insert(row.begin() + 6 + i, static_cast<float>(i));
    }
    writeRawPly(dir / "deg1.ply", names, {row});
    const auto g = io::loadSplatPly(dir / "deg1.ply").splats.at(0);
    ASSERT_EQ(g.color.degree(), 1);
    // f_rest_{c * 3 + k - 1} is coefficient k of channel c.
    EXPECT_EQ(g.color.coeffs[1], Vec3(0, 3, 6));
    EXPECT_EQ(g.color.coeffs[2], Vec3(1, 4, 7));
    EXPECT_EQ(g.color.coeffs[3], Vec3(2, 5, 8));
}

TEST(SplatPly, MissingFieldIsNamed) {
    const auto dir = test::scratchDir();
    auto       names = kMinimalFields;
    names.erase(names.begin() + 7); // scale_0
    writeRawPly(dir / "bad.ply", names, {std::vector<float>(names.size(), 0.0f)});
    try {
        io::loadSplatPly(dir / "bad.ply");
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_EQ(e.field(), "scale_0");
        EXPECT_NE(std::string(e.what()).find("scale_0"), std::string::npos);
    }
}

TEST(SplatPly, NonFiniteValueReportsIndex) {
    const auto         dir = test::scratchDir();
    std::vector<float> ok{0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0};
    auto               bad = ok;
    bad[1]                 = std::numeric_limits<float>::quiet_NaN();
    writeRawPly(dir / "nan.ply", kMinimalFields, {ok, ok, bad});
    try {
        io::loadSplatPly(dir / "nan.ply");
        FAIL();
    } catch (const DataError &e) {
        EXPECT_EQ(e.index(), 2u);
    }
    auto zeroQuat = ok;
    zeroQuat[10]  = 0;
    writeRawPly(dir / "q.ply", kMinimalFields, {zeroQuat});
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "q.ply"); }), ErrorKind::Data);
    auto huge = ok;
    huge[7]   = 1e30f; // exp overflows
    writeRawPly(dir / "inf.ply", kMinimalFields, {huge});
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "inf.ply"); }), ErrorKind::Data);
}

TEST(SplatPly, RejectsOtherFormatsAndMissingFiles) {
    const auto dir = test::scratchDir();
    writeRawPly(dir / "be.ply", kMinimalFields, {}, "binary_big_endian");
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "be.ply"); }), ErrorKind::Format);
    spit(dir / "junk.ply", "not a ply\n");
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "junk.ply"); }), ErrorKind::Format);
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "absent.ply"); }), ErrorKind::Io);
    try {
        io::loadSplatPly(dir / "absent.ply");
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("absent.ply"), std::string::npos);
    }
}

TEST(SplatPly, TruncatedPayloadIsFormatError) {
    const auto dir  = test::scratchDir();
    const auto full = dir / "full.ply";
    std::vector<float> row(14, 0.0f);
    row[10] = 1.0f; // identity rotation
    writeRawPly(full, kMinimalFields, {row, row});
    std::string bytes = slurp(full);
    spit(dir / "cut.ply", bytes.substr(0, bytes.size() - 10));
    EXPECT_EQ(thrownKind([&] { io::loadSplatPly(dir / "cut.ply"); }), ErrorKind::Format);
}

constexpr const char *kCamera = R"({"id": "a", "width": 4, "height": 3, "fx": 5, "fy": 6, "cx": 2, "cy": 1.5,
  "rotation": [0, -1, 0, 1, 0, 0, 0, 0, 1], "translation": [1, 2, 3]})";

TEST(CamerasJson, LoadsArrayAndWrappedForms) {
    const auto dir = test::scratchDir();
    spit(dir / "a.json", std::string("[") + kCamera + "]");
    spit(dir / "b.json", std::string(R"({"cameras": [)") + kCamera + "]}");
    for (const char *name : {"a.json", "b.json"}) {
        const auto set = io::loadCamerasJson(dir / name);
        ASSERT_EQ(set.views.size(), 1u);
        const auto &c = set.views[0].camera;
        EXPECT_EQ(set.views[0].id, "a");
        EXPECT_EQ(c.width, 4);
        EXPECT_EQ(c.height, 3);
        EXPECT_EQ(c.fy, 6.0);
        EXPECT_EQ(c.cy, 1.5);
        EXPECT_NEAR(c.rotation(0, 1), -1.0, 1e-15);
        EXPECT_EQ(c.translation, Vec3(1, 2, 3));
        EXPECT_TRUE(set.views[0].image.empty());
    }
}

TEST(CamerasJson, ErrorsCarryJsonPointers) {
    const auto dir = test::scratchDir();
    struct Case {
        std::string text, pointer;
    };
    const std::string ok = kCamera;
    auto replace = [&](const std::string &from, const std::string &to) {
        std::string s = ok;
        s.replace(s.find(from), from.size(), to);
        return "[" + s + "]";
    };
    const std::vector<Case> cases = {
        {replace(R"("fx": 5, )", ""), "/0/fx"},
        {replace(R"("width": 4)", R"("width": "4")"), "/0/width"},
        {replace(R"("translation": [1, 2, 3])", R"("translation": [1, 2])"), "/0/translation"},
        {replace(R"("rotation": [0, -1, 0, 1, 0, 0, 0, 0, 1])", R"("rotation": [0, -1, 0, 1, 0, 0, 0, 0, 1.01])"), "/0"},
        {replace(R"("rotation": [0, -1, 0, 1, 0, 0, 0, 0, 1])", R"("rotation": [0, 1, 0, 1, 0, 0, 0, 0, 1])"), "/0/rotation"},
        {"[" + ok + ", " + ok + "]", "/1/id"},
        {replace(R"("translation": [1, 2, 3])", R"("translation": [1, 2, 3], "image": "nope.png")"), "/0/image"},
        {R"({"views": []})", "/cameras"},
    };
    for (const auto &c : cases) {
        spit(dir / "c.json", c.text);
        try {
            io::loadCamerasJson(dir / "c.json");
            ADD_FAILURE() << "accepted: " << c.text;
        } catch (const FormatError &e) {
            EXPECT_EQ(e.field(), c.pointer) << e.what();
        }
    }
    spit(dir / "broken.json", "[{");
    EXPECT_EQ(thrownKind([&] { io::loadCamerasJson(dir / "broken.json"); }), ErrorKind::Format);
}

TEST(CamerasJson, SlightlyOffRotationIsSnapped) {
    const auto  dir = test::scratchDir();
    std::string s   = kCamera;
    s.replace(s.find("0, 0, 1]"), 8, "0, 0, 1.0004]");
    spit(dir / "c.json", "[" + s + "]");
    const Mat3 r = io::loadCamerasJson(dir / "c.json").views[0].camera.rotation;
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CamerasJson, RoundTripWithRelativeImages) {
    const auto dir = test::scratchDir();
    fs::create_directories(dir / "img");
    io::writeImagePng(Image(4, 3, 3, 0.5), dir / "img" / "a.png");
    io::writePfm(Image(4, 3, 1, 2.0), dir / "img" / "a.pfm");
    synth::Rng    rng(102);
    io::CameraSet set;
    for (int i = 0; i < 3; ++i) {
        io::CameraView v;
        v.id     = "view" + std::to_string(i);
        v.camera = synth::randomCamera(rng, 4, 3);
        v.image  = dir / "img" / "a.png";
        v.depth  = dir / "img" / "a.pfm";
        set.views.push_back(v);
    }
    io::saveCamerasJson(set, dir / "cams.json");
    EXPECT_NE(slurp(dir / "cams.json").find("\"img/a.png\""), std::string::npos);
    const auto back = io::loadCamerasJson(dir / "cams.json");
    ASSERT_EQ(back.views.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        const auto &a = set.views[i], &b = back.views[i];
        EXPECT_EQ(a.id, b.id);
        EXPECT_TRUE(a.camera.rotation.isApprox(b.camera.rotation, 1e-12));
        EXPECT_TRUE(a.camera.translation.isApprox(b.camera.translation, 1e-15));
        EXPECT_EQ(a.camera.fx, b.camera.fx);
        EXPECT_TRUE(fs::equivalent(a.image, b.image));
        EXPECT_TRUE(fs::equivalent(a.depth, b.depth));
    }
}

TEST(Png, RoundTripWithinQuantization) {
    const auto dir = test::scratchDir();
    synth::Rng rng(103);
    Image      img(13, 7, 3);
    for (double &v : img.data()) {
        v = test::uniform(rng, 0, 1);
    }
    io::writeImagePng(img, dir / "x.png");
    const Image back = io::readImagePng(dir / "x.png");
    ASSERT_TRUE(back.sameShape(img));
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        // One sRGB code value is at most ~0.013 in linear units.
        EXPECT_NEAR(back.data()[i], img.data()[i], 0.008);
    }
    io::writeImagePng(img, dir / "y.png");
    EXPECT_EQ(slurp(dir / "x.png"), slurp(dir / "y.png"));
    EXPECT_EQ(thrownKind([&] { io::writeImagePng(Image(2, 2, 1), dir / "z.png"); }), ErrorKind::InvalidArgument);
    spit(dir / "bad.png", "nope");
    EXPECT_EQ(thrownKind([&] { io::readImagePng(dir / "bad.png"); }), ErrorKind::Format);
}

TEST(Pfm, ZerosAndLayout) {
    const auto dir = test::scratchDir();
    io::writePfm(Image(3, 2, 1), dir / "z.pfm");
    const std::string bytes  = slurp(dir / "z.pfm");
    const std::string header = "Pf\n3 2\n-1.0\n";
    ASSERT_EQ(bytes.size(), header.size() + 6 * 4);
    EXPECT_EQ(bytes.substr(0, header.size()), header);
    EXPECT_TRUE(std::all_of(bytes.begin() + static_cast<long>(header.size()), bytes.end(),
                            [](char c) { return c == 0; }));
    // Rows are stored bottom to top.
    Image img(2, 2, 1);
    img.at(0, 0) = 1;
    img.at(1, 1) = 4;
    io::writePfm(img, dir / "r.pfm");
    const std::string r = slurp(dir / "r.pfm");
    float             first;
    std::memcpy(&first, r.data() + r.find("-1.0\n") + 5, 4);
    EXPECT_EQ(first, 0.0f); // (0, 1)
    float last;
    std::memcpy(&last, r.data() + r.size() - 8, 4);
    EXPECT_EQ(last, 1.0f); // (0, 0)
}

TEST(Pfm, RoundTripIsBitIdentical) {
    const auto dir = test::scratchDir();
    synth::Rng rng(104);
    for (int channels : {1, 3}) {
        Image img(17, 9, channels);
        for (double &v : img.data()) {
            v = static_cast<float>(test::uniform(rng, -100, 100));
        }
        io::writePfm(img, dir / "a.pfm");
        const Image back = io::readPfm(dir / "a.pfm");
        EXPECT_EQ(back, img);
        io::writePfm(back, dir / "b.pfm");
        EXPECT_EQ(slurp(dir / "a.pfm"), slurp(dir / "b.pfm"));
    }
    EXPECT_EQ(thrownKind([&] { io::writePfm(Image(2, 2, 2), dir / "c.pfm"); }), ErrorKind::InvalidArgument);
    spit(dir / "be.pfm", "Pf\n1 1\n1.0\n0000");
    EXPECT_EQ(thrownKind([&] { io::readPfm(dir / "be.pfm"); }), ErrorKind::Format);
    spit(dir / "cut.pfm", "Pf\n4 4\n-1\n0000");
    EXPECT_EQ(thrownKind([&] { io::readPfm(dir / "cut.pfm"); }), ErrorKind::Format);
}

TriangleMesh
tetrahedron() {
    TriangleMesh m;
    m.vertices  = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    m.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return m;
}

TEST(WriteMesh, ObjText) {
    const auto dir = test::scratchDir();
    auto       m   = tetrahedron();
    io::writeMesh(m, dir / "t.obj");
    const std::string text = slurp(dir / "t.obj");
    EXPECT_NE(text.find("v 1 0 0\n"), std::string::npos);
    EXPECT_NE(text.find("f 1 3 2\n"), std::string::npos);
    m.normals.assign(4, Vec3::UnitZ());
    io::writeMesh(m, dir / "n.obj");
    EXPECT_NE(slurp(dir / "n.obj").find("f 2//2 3//3 4//4\n"), std::string::npos);
}

TEST(WriteMesh, BinaryPly) {
    const auto dir = test::scratchDir();
    io::writeMesh(tetrahedron(), dir / "t.ply");
    const std::string bytes = slurp(dir / "t.ply");
    EXPECT_EQ(bytes.rfind("ply\nformat binary_little_endian 1.0\n", 0), 0u);
    EXPECT_NE(bytes.find("element vertex 4\n"), std::string::npos);
    EXPECT_NE(bytes.find("element face 4\n"), std::string::npos);
    const auto body = bytes.find("end_header\n") + 11;
    // 4 vertices of 3 floats, 4 faces of (uchar count + 3 ints).
    EXPECT_EQ(bytes.size() - body, 4u * 12u + 4u * 13u);
    EXPECT_EQ(thrownKind([&] { io::writeMesh(tetrahedron(), "/nonexistent/dir/m.ply"); }), ErrorKind::Io);
}

} // namespace
} // namespace splatdepth
