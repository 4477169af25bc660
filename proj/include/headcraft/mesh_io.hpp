// mesh_io.hpp — OBJ and PLY readers/writers plus the region sidecar format.
//
// OBJ: `v`, `vt`, `f` with 1-based `v/vt` corner references. Faces with more
// than three corners are fan-triangulated. Negative (relative) indices are
// rejected.
// PLY: ASCII and binary_little_endian, element "vertex" with float or double
// x/y/z, optional "face" element with a uchar-counted index list.
// Regions: a sidecar `<mesh>.regions.txt` with `vertex_index region_name`
// lines; vertices not listed default to scalp.
#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "headcraft/mesh.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {

namespace detail {

struct ObjData {
    std::vector<Vec3> positions;
    std::vector<Vec2> uvs;
    std::vector<std::array<int, 3>> faces;       // 0-based position indices
    std::vector<std::array<int, 3>> face_uvs;    // 0-based uv indices, -1 if absent
    bool any_uv_refs = false;
};

// Parses one `f` corner token: "3", "3/7", "3//5", "3/7/5".
inline void parse_obj_corner(const std::string& token, std::size_t line_no, int& v_idx,
                             int& vt_idx) {
    std::size_t s1 = token.find('/');
    std::string vs = token.substr(0, s1);
    std::string vts;
    if (s1 != std::string::npos) {
        std::size_t s2 = token.find('/', s1 + 1);
        vts = token.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
    }
    auto to_index = [&](const std::string& s, const char* what) {
        std::size_t pos = 0;
        long val = 0;
        try {
            val = std::stol(s, &pos);
        } catch (...) {
            throw std::runtime_error("OBJ line " + std::to_string(line_no) + ": bad " + what +
                                     " index '" + s + "'");
        }
        if (pos != s.size())
            throw std::runtime_error("OBJ line " + std::to_string(line_no) + ": bad " + what +
                                     " index '" + s + "'");
        if (val <= 0)
            throw std::runtime_error("OBJ line " + std::to_string(line_no) + ": " + what +
                                     " index " + s + " is not positive (OBJ is 1-based)");
        return static_cast<int>(val - 1);
    };
    v_idx = to_index(vs, "vertex");
    vt_idx = vts.empty() ? -1 : to_index(vts, "texture");
}

inline ObjData read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ObjData data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                throw std::runtime_error("OBJ line " + std::to_string(line_no) +
                                         ": malformed vertex");
            data.positions.push_back(p);
        } else if (tag == "vt") {
            Vec2 uv;
            if (!(ss >> uv.x >> uv.y))
                throw std::runtime_error("OBJ line " + std::to_string(line_no) +
                                         ": malformed texture coordinate");
            data.uvs.push_back(uv);
        } else if (tag == "f") {
            std::vector<int> vi, ti;
            std::string token;
            while (ss >> token) {
                int v, t;
                parse_obj_corner(token, line_no, v, t);
                vi.push_back(v);
                ti.push_back(t);
                if (t >= 0) data.any_uv_refs = true;
            }
            if (vi.size() < 3)
                throw std::runtime_error("OBJ line " + std::to_string(line_no) +
                                         ": face with fewer than 3 corners");
            for (std::size_t k = 1; k + 1 < vi.size(); ++k) {
                data.faces.push_back({vi[0], vi[k], vi[k + 1]});
                data.face_uvs.push_back({ti[0], ti[k], ti[k + 1]});
            }
        }
        // Other tags (vn, o, g, s, usemtl, ...) are ignored.
    }
    const int nv = static_cast<int>(data.positions.size());
    const int nt = static_cast<int>(data.uvs.size());
    for (std::size_t f = 0; f < data.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (data.faces[f][k] >= nv)
                throw std::runtime_error("OBJ: face references vertex " +
                                         std::to_string(data.faces[f][k] + 1) + " but only " +
                                         std::to_string(nv) + " vertices exist");
            if (data.face_uvs[f][k] >= nt)
                throw std::runtime_error("OBJ: face references texture coordinate " +
                                         std::to_string(data.face_uvs[f][k] + 1) + " but only " +
                                         std::to_string(nt) + " exist");
        }
    }
    return data;
}

}  // namespace detail

inline std::string region_sidecar_path(const std::string& mesh_path) {
    return mesh_path + ".regions.txt";
}

// Loads `vertex_index region_name` lines; missing file means all scalp.
inline std::vector<Region> load_regions(const std::string& mesh_path, std::size_t vertex_count) {
    std::vector<Region> regions(vertex_count, Region::scalp);
    std::ifstream in(region_sidecar_path(mesh_path));
    if (!in) return regions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        long idx;
        std::string name;
        if (!(ss >> idx)) continue;  // blank line
        if (!(ss >> name))
            throw std::runtime_error("regions line " + std::to_string(line_no) + ": missing name");
        if (idx < 0 || static_cast<std::size_t>(idx) >= vertex_count)
            throw std::runtime_error("regions line " + std::to_string(line_no) +
                                     ": vertex index out of range");
        Region r;
        if (!region_from_name(name, r))
            throw std::runtime_error("regions line " + std::to_string(line_no) +
                                     ": unknown region '" + name + "'");
        regions[static_cast<std::size_t>(idx)] = r;
    }
    return regions;
}

inline void save_regions(const std::string& mesh_path, const std::vector<Region>& regions) {
    std::ofstream out(region_sidecar_path(mesh_path));
    if (!out) throw std::runtime_error("cannot write " + region_sidecar_path(mesh_path));
    for (std::size_t i = 0; i < regions.size(); ++i)
        out << i << ' ' << region_name(regions[i]) << '\n';
}

// Loads an OBJ as a template mesh. UVs are required; region labels come from
// the sidecar when present.
inline TemplateMesh load_template_mesh(const std::string& path) {
    detail::ObjData data = detail::read_obj(path);
    if (!data.any_uv_refs) throw std::runtime_error(path + ": template mesh has no UVs");
    TemplateMesh mesh;
    mesh.vertices = data.positions;
    mesh.faces = data.faces;
    mesh.corner_uvs.resize(data.faces.size());
    for (std::size_t f = 0; f < data.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            int t = data.face_uvs[f][k];
            if (t < 0)
                throw std::runtime_error(path + ": face " + std::to_string(f) +
                                         " misses a texture coordinate");
            mesh.corner_uvs[f][k] = data.uvs[t];
        }
    }
    mesh.regions = load_regions(path, mesh.vertices.size());
    validate_mesh(mesh, /*require_uvs=*/true);
    return mesh;
}

// --- PLY ---

namespace detail {

struct PlyProperty {
    std::string type;  // scalar type, or list count/value types joined for lists
    std::string name;
    bool is_list = false;
    std::string count_type, value_type;
};

inline std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw std::runtime_error("PLY: unsupported type " + t);
}

inline double ply_read_scalar(std::istream& in, const std::string& type, bool binary) {
    if (!binary) {
        double v;
        if (!(in >> v)) throw std::runtime_error("PLY: truncated ASCII data");
        return v;
    }
    unsigned char buf[8];
    std::size_t n = ply_type_size(type);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("PLY: truncated binary data");
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, buf, 4);
        return f;
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, buf, 8);
        return d;
    }
    // Integer types, little-endian.
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < n; ++i) u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    bool is_signed = type[0] == 'c' || type[0] == 's' || (type[0] == 'i');
    if (is_signed) {
        std::uint64_t sign_bit = std::uint64_t{1} << (8 * n - 1);
        if (u & sign_bit) return static_cast<double>(static_cast<std::int64_t>(u | ~(sign_bit * 2 - 1)));
    }
    return static_cast<double>(u);
}

}  // namespace detail

inline ScanCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw std::runtime_error(path + ": not a PLY file");

    bool binary = false;
    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<detail::PlyProperty> props;
    };
    std::vector<Element> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment" || tag == "obj_info") continue;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw std::runtime_error(path + ": unsupported PLY format " + fmt);
        } else if (tag == "element") {
            Element e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw std::runtime_error(path + ": property before element");
            detail::PlyProperty p;
            std::string t;
            ss >> t;
            if (t == "list") {
                p.is_list = true;
                ss >> p.count_type >> p.value_type >> p.name;
            } else {
                p.type = t;
                ss >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        } else {
            throw std::runtime_error(path + ": unexpected header line '" + line + "'");
        }
    }

    ScanCloud cloud;
    for (const auto& elem : elements) {
        if (elem.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t p = 0; p < elem.props.size(); ++p) {
                if (elem.props[p].is_list)
                    throw std::runtime_error(path + ": list property in vertex element");
                if (elem.props[p].name == "x") ix = static_cast<int>(p);
                if (elem.props[p].name == "y") iy = static_cast<int>(p);
                if (elem.props[p].name == "z") iz = static_cast<int>(p);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw std::runtime_error(path + ": vertex element misses x/y/z");
            cloud.points.reserve(elem.count);
            std::vector<double> row(elem.props.size());
            for (std::size_t i = 0; i < elem.count; ++i) {
                for (std::size_t p = 0; p < elem.props.size(); ++p)
                    row[p] = detail::ply_read_scalar(in, elem.props[p].type, binary);
                Vec3 pt{row[ix], row[iy], row[iz]};
                if (!is_finite(pt))
                    throw std::runtime_error(path + ": non-finite vertex coordinate");
                cloud.points.push_back(pt);
            }
        } else if (elem.name == "face") {
            for (std::size_t i = 0; i < elem.count; ++i) {
                for (const auto& prop : elem.props) {
                    if (!prop.is_list) {
                        detail::ply_read_scalar(in, prop.type, binary);
                        continue;
                    }
                    std::size_t cnt =
                        static_cast<std::size_t>(detail::ply_read_scalar(in, prop.count_type, binary));
                    std::vector<int> idx(cnt);
                    for (std::size_t k = 0; k < cnt; ++k)
                        idx[k] = static_cast<int>(detail::ply_read_scalar(in, prop.value_type, binary));
                    if (prop.name == "vertex_indices" || prop.name == "vertex_index") {
                        for (std::size_t k = 1; k + 1 < cnt; ++k)
                            cloud.faces.push_back({idx[0], idx[k], idx[k + 1]});
                    }
                }
            }
        } else {
            // Skip unknown elements (only possible to do safely in ASCII).
            if (binary)
                throw std::runtime_error(path + ": unknown element '" + elem.name +
                                         "' in binary PLY");
            for (std::size_t i = 0; i < elem.count; ++i)
                for (const auto& prop : elem.props) (void)detail::ply_read_scalar(in, prop.type, false);
        }
    }
    if (cloud.points.empty()) throw std::runtime_error(path + ": no points");
    const int np = static_cast<int>(cloud.points.size());
    for (const auto& tri : cloud.faces)
        for (int k = 0; k < 3; ++k)
            if (tri[k] < 0 || tri[k] >= np)
                throw std::runtime_error(path + ": face index out of range");
    return cloud;
}

inline void save_ply(const std::string& path, const ScanCloud& cloud, bool binary = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << cloud.points.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (!cloud.faces.empty()) {
        out << "element face " << cloud.faces.size() << "\n";
        out << "property list uchar int vertex_indices\n";
    }
    out << "end_header\n";
    if (binary) {
        for (const Vec3& p : cloud.points) {
            float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z)};
            out.write(reinterpret_cast<const char*>(xyz), 12);
        }
        for (const auto& tri : cloud.faces) {
            unsigned char n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            std::int32_t idx[3] = {tri[0], tri[1], tri[2]};
            out.write(reinterpret_cast<const char*>(idx), 12);
        }
    } else {
        char buf[128];
        for (const Vec3& p : cloud.points) {
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
            out << buf;
        }
        for (const auto& tri : cloud.faces)
            out << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Loads a scan from OBJ or PLY (by extension). OBJ scans do not need UVs.
inline ScanCloud load_scan(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == "ply") return load_ply(path);
    if (ext == "obj") {
        detail::ObjData data = detail::read_obj(path);
        if (data.positions.empty()) throw std::runtime_error(path + ": no points");
        ScanCloud cloud;
        cloud.points = data.positions;
        cloud.faces = data.faces;
        for (const Vec3& p : cloud.points)
            if (!is_finite(p)) throw std::runtime_error(path + ": non-finite vertex coordinate");
        return cloud;
    }
    throw std::runtime_error(path + ": unknown scan format (expected .obj or .ply)");
}

// Writes v/vt/f with shared vt entries per corner. %.9g keeps the read-back
// error well under 1e-6 at scene scale.
inline void save_obj(const std::string& path, const TemplateMesh& mesh,
                     const std::vector<Vec3>* displacements = nullptr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[160];
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 p = mesh.vertices[i];
        if (displacements) p += (*displacements)[i];
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
        out << buf;
    }
    const bool with_uvs = mesh.has_uvs();
    if (with_uvs) {
        for (const auto& fuv : mesh.corner_uvs) {
            for (int k = 0; k < 3; ++k) {
                std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", fuv[k].x, fuv[k].y);
                out << buf;
            }
        }
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        if (with_uvs) {
            std::size_t base = 3 * f;
            out << "f " << tri[0] + 1 << '/' << base + 1 << ' ' << tri[1] + 1 << '/' << base + 2
                << ' ' << tri[2] + 1 << '/' << base + 3 << '\n';
        } else {
            out << "f " << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1 << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace headcraft
