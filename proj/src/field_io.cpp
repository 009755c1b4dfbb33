#include "raycalib/error.hpp"
#include "raycalib/fov_field.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace raycalib {

namespace {

void put_u32(std::ostream &os, uint32_t v) {
    const std::array<char, 4> b = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                                   char((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

uint32_t get_u32(const unsigned char *p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void put_f32(std::ostream &os, double value) {
    const float f = static_cast<float>(value);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
}

float get_f32(const unsigned char *p) {
    const uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
    return out;
}

} // namespace

void write_aff1(const FovField &field, const std::filesystem::path &path) {
    auto out = open_out(path);
    out.write("AFF1", 4);
    put_u32(out, static_cast<uint32_t>(field.width));
    put_u32(out, static_cast<uint32_t>(field.height));
    for (const auto &t : field.theta) {
        put_f32(out, t.x());
        put_f32(out, t.y());
    }
}

FovField read_aff1(const std::filesystem::path &path) {
    const std::string data = slurp(path);
    const auto *p = reinterpret_cast<const unsigned char *>(data.data());
    if (data.size() < 12 || std::memcmp(p, "AFF1", 4) != 0)
        throw Error(ErrorKind::ParseError, path.string() + ": missing AFF1 header");
    const uint32_t w = get_u32(p + 4), h = get_u32(p + 8);
    const uint64_t expected = 12 + uint64_t(w) * uint64_t(h) * 8;
    if (w == 0 || h == 0 || data.size() != expected)
        throw Error(ErrorKind::ParseError, path.string() + ": size does not match " + std::to_string(w) + "x" +
                                               std::to_string(h) + " header");
    FovField field(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < field.size(); ++i) {
        const unsigned char *c = p + 12 + 8 * i;
        field.theta[i] = Theta(get_f32(c), get_f32(c + 4));
    }
    return field;
}

void write_field_csv(const FovField &field, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << "u,v,theta_x,theta_y\n";
    char line[160];
    for (int i = 0; i < field.height; ++i) {
        for (int j = 0; j < field.width; ++j) {
            const Pixel px = field.pixel(i, j);
            const Theta &t = field.at(i, j);
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", px.x(), px.y(), t.x(), t.y());
            out << line;
        }
    }
}

FovField read_field_csv(const std::filesystem::path &path) {
    std::istringstream in(slurp(path));
    std::string line;
    struct Row {
        double u, v, tx, ty;
    };
    std::vector<Row> rows;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        Row r{};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r.u, &r.v, &r.tx, &r.ty) != 4) {
            if (rows.empty() && lineno == 1)
                continue; // header
            throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected u,v,theta_x,theta_y");
        }
        rows.push_back(r);
    }
    if (rows.empty())
        throw Error(ErrorKind::ParseError, path.string() + ": no samples");

    std::map<double, int> us, vs;
    for (const auto &r : rows) {
        us.emplace(r.u, 0);
        vs.emplace(r.v, 0);
    }
    int stride = 1;
    if (us.size() > 1)
        stride = static_cast<int>(std::lround(std::next(us.begin())->first - us.begin()->first));
    else if (vs.size() > 1)
        stride = static_cast<int>(std::lround(std::next(vs.begin())->first - vs.begin()->first));
    if (stride < 1)
        throw Error(ErrorKind::ParseError, path.string() + ": irregular pixel grid");

    FovField field(static_cast<int>(us.size()), static_cast<int>(vs.size()), stride);
    if (rows.size() != field.size())
        throw Error(ErrorKind::ParseError, path.string() + ": samples do not form a full grid");
    int idx = 0;
    for (auto &[u, j] : us)
        j = idx++;
    idx = 0;
    for (auto &[v, i] : vs)
        i = idx++;
    std::vector<char> seen(field.size(), 0);
    for (const auto &r : rows) {
        const int i = vs[r.v], j = us[r.u];
        const Pixel expect = field.pixel(i, j);
        if (std::abs(expect.x() - r.u) > 1e-6 || std::abs(expect.y() - r.v) > 1e-6)
            throw Error(ErrorKind::ParseError, path.string() + ": samples must sit at pixel centers of a regular grid");
        const size_t k = size_t(i) * size_t(field.width) + size_t(j);
        if (seen[k]++)
            throw Error(ErrorKind::ParseError, path.string() + ": duplicate sample");
        field.theta[k] = Theta(r.tx, r.ty);
    }
    return field;
}

FovField read_field(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    in.close();
    if (std::memcmp(magic, "AFF1", 4) == 0)
        return read_aff1(path);
    return read_field_csv(path);
}

} // namespace raycalib
