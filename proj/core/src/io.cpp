// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/io.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/gaussian.hpp"

#include <Eigen/SVD>
#include <json.hpp>
#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace splatdepth::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using nlohmann::json;

[[noreturn]] void
ioFailure(const std::string &what, const std::filesystem::path &path) {
    raise(ErrorKind::Io, what + ": " + path.string());
}

std::ofstream
openForWrite(const std::filesystem::path &path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) {
        ioFailure("cannot open for writing", path);
    }
    return out;
}

std::ifstream
openForRead(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ioFailure("cannot open", path);
    }
    return in;
}

void
finishWrite(std::ofstream &out, const std::filesystem::path &path) {
    out.flush();
    if (!out) {
        ioFailure("write failed", path);
    }
}

template <typename T>
void
writeRaw(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

// ---------------------------------------------------------------- PLY splats

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0;
    std::size_t size   = 0;
};

std::size_t
plyTypeSize(const std::string &type) {
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1},  {"int8", 1},   {"uchar", 1},  {"uint8", 1},   {"short", 2},
        {"int16", 2}, {"ushort", 2}, {"uint16", 2}, {"int", 4},     {"int32", 4},
        {"uint", 4},  {"uint32", 4}, {"float", 4},  {"float32", 4}, {"double", 8},
        {"float64", 8}};
    const auto it = sizes.find(type);
    if (it == sizes.end()) {
        throw FormatError("unsupported PLY property type '" + type + "'", type);
    }
    return it->second;
}

double
readPlyValue(const char *p, const std::string &type) {
    auto load = [p]<typename T>(T) {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return static_cast<double>(v);
    };
    if (type == "float" || type == "float32") return load(float{});
    if (type == "double" || type == "float64") return load(double{});
    if (type == "uchar" || type == "uint8") return load(std::uint8_t{});
    if (type == "char" || type == "int8") return load(std::int8_t{});
    if (type == "short" || type == "int16") return load(std::int16_t{});
    if (type == "ushort" || type == "uint16") return load(std::uint16_t{});
    if (type == "int" || type == "int32") return load(std::int32_t{});
    return load(std::uint32_t{});
}

double
sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

// ---------------------------------------------------------------- cameras

std::string
pointer(const std::string &base, const std::string &key) {
    return base + "/" + key;
}

const json &
requireField(const json &obj, const std::string &key, const std::string &base) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw FormatError("camera JSON is missing '" + key + "' at " + pointer(base, key),
                          pointer(base, key));
    }
    return obj.at(key);
}

double
requireNumber(const json &obj, const std::string &key, const std::string &base) {
    const json &v = requireField(obj, key, base);
    if (!v.is_number()) {
        throw FormatError("camera JSON field " + pointer(base, key) + " must be a number",
                          pointer(base, key));
    }
    return v.get<double>();
}

int
requireInt(const json &obj, const std::string &key, const std::string &base) {
    const json &v = requireField(obj, key, base);
    if (!v.is_number_integer()) {
        throw FormatError("camera JSON field " + pointer(base, key) + " must be an integer",
                          pointer(base, key));
    }
    return v.get<int>();
}

std::vector<double>
requireArray(const json &obj, const std::string &key, std::size_t size, const std::string &base) {
    const json &v = requireField(obj, key, base);
    if (!v.is_array() || v.size() != size) {
        throw FormatError("camera JSON field " + pointer(base, key) + " must be an array of " +
                              std::to_string(size) + " numbers",
                          pointer(base, key));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < size; ++i) {
        if (!v[i].is_number()) {
            throw FormatError("camera JSON field " + pointer(base, key) + "/" + std::to_string(i) +
                                  " must be a number",
                              pointer(base, key) + "/" + std::to_string(i));
        }
        out.push_back(v[i].get<double>());
    }
    return out;
}

double
toSrgb(double linear) {
    const double c = std::clamp(linear, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double
fromSrgb(double encoded) {
    return encoded <= 0.04045 ? encoded / 12.92 : std::pow((encoded + 0.055) / 1.055, 2.4);
}

std::string
readToken(std::istream &in) {
    std::string token;
    in >> token;
    return token;
}

} // namespace

SceneFile
loadSplatPly(const std::filesystem::path &path) {
    std::ifstream in = openForRead(path);
    std::string   line;
    std::getline(in, line);
    if (line != "ply") {
        throw FormatError("not a PLY file: " + path.string(), "magic");
    }
    std::vector<PlyProperty> props;
    std::size_t              count = 0, stride = 0;
    bool                     inVertex = false, sawVertex = false, binaryLe = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string        kw;
        ls >> kw;
        if (kw == "end_header") {
            break;
        } else if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            binaryLe = fmt == "binary_little_endian";
        } else if (kw == "element") {
            std::string name;
            ls >> name;
            if (name == "vertex") {
                if (sawVertex) {
                    throw FormatError("duplicate vertex element in " + path.string(), "vertex");
                }
                if (!props.empty() || (!sawVertex && inVertex)) {
                    throw FormatError("vertex must be the first PLY element", "vertex");
                }
                ls >> count;
                inVertex = sawVertex = true;
            } else {
                if (!sawVertex) {
                    throw FormatError("vertex must be the first PLY element", name);
                }
                inVertex = false;
            }
        } else if (kw == "property" && inVertex) {
            PlyProperty prop;
            ls >> prop.type;
            if (prop.type == "list") {
                throw FormatError("list properties are not supported in the vertex element",
                                  prop.type);
            }
            ls >> prop.name;
            prop.size   = plyTypeSize(prop.type);
            prop.offset = stride;
            stride += prop.size;
            props.push_back(prop);
        }
    }
    if (!binaryLe) {
        throw FormatError("PLY must be binary_little_endian: " + path.string(), "format");
    }
    if (!sawVertex) {
        throw FormatError("PLY has no vertex element: " + path.string(), "vertex");
    }

    std::map<std::string, const PlyProperty *> byName;
    for (const auto &p : props) {
        byName[p.name] = &p;
    }
    auto field = [&](const std::string &name) -> const PlyProperty & {
        const auto it = byName.find(name);
        if (it == byName.end()) {
            throw FormatError("PLY is missing required field '" + name + "'", name);
        }
        return *it->second;
    };
    std::vector<const PlyProperty *> required;
    for (const char *name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                             "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        required.push_back(&field(name));
    }
    int restCount = 0;
    while (byName.contains("f_rest_" + std::to_string(restCount))) {
        ++restCount;
    }
    int degree = 0;
    switch (restCount) {
    case 0: degree = 0; break;
    case 9: degree = 1; break;
    case 24: degree = 2; break;
    case 45: degree = 3; break;
    default:
        throw FormatError("unsupported number of f_rest fields: " + std::to_string(restCount),
                          "f_rest_" + std::to_string(restCount));
    }
    std::vector<const PlyProperty *> rest;
    for (int i = 0; i < restCount; ++i) {
        rest.push_back(&field("f_rest_" + std::to_string(i)));
    }

    SceneFile scene;
    scene.shDegree   = degree;
    scene.sourcePath = path.string();
    scene.splats.reserve(count);
    const int         perChannel = restCount / 3;
    std::vector<char> row(stride);
    for (std::size_t i = 0; i < count; ++i) {
        if (!in.read(row.data(), static_cast<std::streamsize>(stride))) {
            throw FormatError("PLY payload truncated at splat " + std::to_string(i), "vertex");
        }
        auto get = [&](std::size_t k) {
            return readPlyValue(row.data() + required[k]->offset, required[k]->type);
        };
        Gaussian3D g;
        g.center  = {get(0), get(1), get(2)};
        g.color   = ShCoefficients::withDegree(degree);
        g.color.dc() = {get(3), get(4), get(5)};
        for (int k = 1; k <= perChannel; ++k) {
            for (int c = 0; c < 3; ++c) {
                const auto *p = rest[static_cast<std::size_t>(c * perChannel + k - 1)];
                g.color.coeffs[k][c] = readPlyValue(row.data() + p->offset, p->type);
            }
        }
        g.opacity = sigmoid(get(6));
        g.scales  = {std::exp(get(7)), std::exp(get(8)), std::exp(get(9))};
        Vec4 q(get(10), get(11), get(12), get(13));
        const double qn = q.norm();
        if (!(qn > 0.0) || !std::isfinite(qn)) {
            throw DataError("splat " + std::to_string(i) + " has a zero or non-finite quaternion", i);
        }
        q /= qn;
        g.rotation = Quat(q[0], q[1], q[2], q[3]);

        bool finite = g.center.allFinite() && g.scales.allFinite() && std::isfinite(g.opacity);
        for (const auto &c : g.color.coeffs) {
            finite = finite && c.allFinite();
        }
        if (!finite) {
            throw DataError("splat " + std::to_string(i) + " has non-finite parameters", i);
        }
        // Saturated activations (opacity 0 or 1, zero scale) are pulled back
        // inside the open domain the primitive invariants require.
        g.opacity = std::clamp(g.opacity, 1e-12, 1.0 - 1e-12);
        g.scales  = g.scales.cwiseMax(kMinScale * 10.0);
        scene.splats.push_back(std::move(g));
    }
    return scene;
}

void
saveSplatPly(std::span<const Gaussian3D> scene, const std::filesystem::path &path) {
    int degree = scene.empty() ? 0 : scene.front().color.degree();
    for (const auto &g : scene) {
        if (g.color.degree() != degree) {
            raise(ErrorKind::InvalidArgument, "all splats must share one SH degree to be saved");
        }
    }
    const int restCount = 3 * ((degree + 1) * (degree + 1) - 1);

    std::ofstream out = openForWrite(path, true);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
    for (const char *name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out << "property float " << name << "\n";
    }
    for (int i = 0; i < restCount; ++i) {
        out << "property float f_rest_" << i << "\n";
    }
    for (const char *name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                             "rot_3"}) {
        out << "property float " << name << "\n";
    }
    out << "end_header\n";
    const int perChannel = restCount / 3;
    for (const auto &g : scene) {
        auto f = [&](double v) { writeRaw(out, static_cast<float>(v)); };
        f(g.center.x());
        f(g.center.y());
        f(g.center.z());
        f(0.0);
        f(0.0);
        f(0.0);
        f(g.color.dc().x());
        f(g.color.dc().y());
        f(g.color.dc().z());
        for (int c = 0; c < 3; ++c) {
            for (int k = 1; k <= perChannel; ++k) {
                f(g.color.coeffs[k][c]);
            }
        }
        f(std::log(g.opacity / (1.0 - g.opacity)));
        f(std::log(g.scales.x()));
        f(std::log(g.scales.y()));
        f(std::log(g.scales.z()));
        f(g.rotation.w());
        f(g.rotation.x());
        f(g.rotation.y());
        f(g.rotation.z());
    }
    finishWrite(out, path);
}

CameraSet
loadCamerasJson(const std::filesystem::path &path) {
    std::ifstream in = openForRead(path);
    json          doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw FormatError("camera JSON does not parse: " + std::string(e.what()), "");
    }
    std::string base;
    const json *list = &doc;
    if (doc.is_object()) {
        base = "/cameras";
        list = &requireField(doc, "cameras", "");
    }
    if (!list->is_array()) {
        throw FormatError("camera JSON must be an array of cameras at " + (base.empty() ? "/" : base),
                          base.empty() ? "/" : base);
    }
    const std::filesystem::path dir = path.parent_path();
    CameraSet                   set;
    std::set<std::string>       seen;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json       &entry = (*list)[i];
        const std::string at    = base + "/" + std::to_string(i);
        CameraView        view;
        const json       &id = requireField(entry, "id", at);
        if (id.is_string()) {
            view.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            view.id = std::to_string(id.get<long long>());
        } else {
            throw FormatError("camera JSON field " + at + "/id must be a string or integer", at + "/id");
        }
        if (!seen.insert(view.id).second) {
            throw FormatError("duplicate camera id '" + view.id + "' at " + at + "/id", at + "/id");
        }
        Camera &cam = view.camera;
        cam.width   = requireInt(entry, "width", at);
        cam.height  = requireInt(entry, "height", at);
        cam.fx      = requireNumber(entry, "fx", at);
        cam.fy      = requireNumber(entry, "fy", at);
        cam.cx      = requireNumber(entry, "cx", at);
        cam.cy      = requireNumber(entry, "cy", at);
        const auto r = requireArray(entry, "rotation", 9, at);
        const auto t = requireArray(entry, "translation", 3, at);
        for (int k = 0; k < 9; ++k) {
            cam.rotation(k / 3, k % 3) = r[static_cast<std::size_t>(k)];
        }
        cam.translation = {t[0], t[1], t[2]};
        try {
            cam.validate(1e-3);
        } catch (const Error &e) {
            throw FormatError(std::string(e.what()) + " at " + at, at);
        }
        if (cam.rotation.determinant() < 0.0) {
            throw FormatError("camera rotation is a reflection at " + at + "/rotation", at + "/rotation");
        }
        // Snap to the nearest rotation so downstream math sees an exact one.
        Eigen::JacobiSVD<Mat3> svd(cam.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
        cam.rotation = svd.matrixU() * svd.matrixV().transpose();

        for (const char *key : {"image", "depth"}) {
            if (!entry.contains(key)) {
                continue;
            }
            if (!entry.at(key).is_string()) {
                throw FormatError("camera JSON field " + at + "/" + key + " must be a string",
                                  at + "/" + key);
            }
            std::filesystem::path file = entry.at(key).get<std::string>();
            if (file.is_relative()) {
                file = dir / file;
            }
            if (!std::filesystem::exists(file)) {
                throw FormatError("referenced file does not exist: " + file.string() + " (" + at +
                                      "/" + key + ")",
                                  at + "/" + key);
            }
            (std::string(key) == "image" ? view.image : view.depth) = file;
        }
        set.views.push_back(std::move(view));
    }
    return set;
}

void
saveCamerasJson(const CameraSet &cameras, const std::filesystem::path &path) {
    json                        list = json::array();
    const std::filesystem::path dir  = path.parent_path();
    for (const auto &view : cameras.views) {
        const Camera &c = view.camera;
        json          entry;
        entry["id"]     = view.id;
        entry["width"]  = c.width;
        entry["height"] = c.height;
        entry["fx"]     = c.fx;
        entry["fy"]     = c.fy;
        entry["cx"]     = c.cx;
        entry["cy"]     = c.cy;
        json rot        = json::array();
        for (int k = 0; k < 9; ++k) {
            rot.push_back(c.rotation(k / 3, k % 3));
        }
        entry["rotation"]    = rot;
        entry["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
        auto rel             = [&](const std::filesystem::path &p) {
            return p.is_absolute() ? std::filesystem::relative(p, dir).generic_string()
                                               : p.generic_string();
        };
        if (!view.image.empty()) {
            entry["image"] = rel(view.image);
        }
        if (!view.depth.empty()) {
            entry["depth"] = rel(view.depth);
        }
        list.push_back(entry);
    }
    std::ofstream out = openForWrite(path, false);
    out << list.dump(2) << "\n";
    finishWrite(out, path);
}

void
writeImagePng(const Image &rgb, const std::filesystem::path &path) {
    if (rgb.channels() != 3 || rgb.empty()) {
        raise(ErrorKind::InvalidArgument, "PNG writer expects a non-empty 3-channel image");
    }
    std::vector<std::uint8_t> bytes(rgb.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(std::lround(toSrgb(rgb.data()[i]) * 255.0));
    }
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width   = static_cast<png_uint_32>(rgb.width());
    image.height  = static_cast<png_uint_32>(rgb.height());
    image.format  = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        ioFailure("cannot write PNG (" + msg + ")", path);
    }
}

Image
readImagePng(const std::filesystem::path &path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!std::filesystem::exists(path)) {
        ioFailure("cannot open", path);
    }
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw FormatError("not a readable PNG: " + path.string(), path.string());
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("PNG decode failed (" + msg + "): " + path.string(), path.string());
    }
    Image out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        out.data()[i] = fromSrgb(bytes[i] / 255.0);
    }
    return out;
}

void
writePfm(const Image &image, const std::filesystem::path &path) {
    if (image.channels() != 1 && image.channels() != 3) {
        raise(ErrorKind::InvalidArgument, "PFM supports 1 or 3 channels");
    }
    std::ofstream out = openForWrite(path, true);
    out << (image.channels() == 3 ? "PF" : "Pf") << "\n"
        << image.width() << " " << image.height() << "\n-1.0\n";
    for (int y = image.height() - 1; y >= 0; --y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                writeRaw(out, static_cast<float>(image.at(x, y, c)));
            }
        }
    }
    finishWrite(out, path);
}

Image
readPfm(const std::filesystem::path &path) {
    std::ifstream     in    = openForRead(path);
    const std::string magic = readToken(in);
    int               channels;
    if (magic == "PF") {
        channels = 3;
    } else if (magic == "Pf") {
        channels = 1;
    } else {
        throw FormatError("not a PFM file: " + path.string(), "magic");
    }
    int    width = 0, height = 0;
    double scale = 0.0;
    in >> width >> height >> scale;
    if (!in || width < 1 || height < 1) {
        throw FormatError("bad PFM header: " + path.string(), "header");
    }
    if (scale >= 0.0) {
        throw FormatError("big-endian PFM is not supported: " + path.string(), "scale");
    }
    in.get(); // single whitespace byte after the scale
    Image img(width, height, channels);
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                float v;
                if (!in.read(reinterpret_cast<char *>(&v), sizeof(v))) {
                    throw FormatError("PFM payload truncated: " + path.string(), "payload");
                }
                img.at(x, y, c) = v;
            }
        }
    }
    return img;
}

void
writeMesh(const TriangleMesh &mesh, const std::filesystem::path &path) {
    const bool withNormals = mesh.normals.size() == mesh.vertices.size() && !mesh.vertices.empty();
    if (path.extension() == ".obj") {
        std::ofstream out = openForWrite(path, false);
        out << std::setprecision(9);
        for (const auto &v : mesh.vertices) {
            out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
        }
        if (withNormals) {
            for (const auto &n : mesh.normals) {
                out << "vn " << n.x() << " " << n.y() << " " << n.z() << "\n";
            }
        }
        for (const auto &t : mesh.triangles) {
            out << "f";
            for (auto idx : t) {
                out << " " << idx + 1;
                if (withNormals) {
                    out << "//" << idx + 1;
                }
            }
            out << "\n";
        }
        finishWrite(out, path);
        return;
    }
    std::ofstream out = openForWrite(path, true);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << mesh.vertices.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (withNormals) {
        out << "property float nx\nproperty float ny\nproperty float nz\n";
    }
    out << "element face " << mesh.triangles.size()
        << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            writeRaw(out, static_cast<float>(mesh.vertices[i][a]));
        }
        if (withNormals) {
            for (int a = 0; a < 3; ++a) {
                writeRaw(out, static_cast<float>(mesh.normals[i][a]));
            }
        }
    }
    for (const auto &t : mesh.triangles) {
        writeRaw(out, std::uint8_t{3});
        for (auto idx : t) {
            writeRaw(out, static_cast<std::int32_t>(idx));
        }
    }
    finishWrite(out, path);
}

} // namespace splatdepth::io
