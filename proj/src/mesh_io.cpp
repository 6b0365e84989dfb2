#include "refmesh/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "refmesh/errors.hpp"

namespace refmesh {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// ---------------------------------------------------------------- OBJ

TriMesh load_obj(const std::string& path, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    TriMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z()))
                throw ParseError(path + ":" + std::to_string(line_no) + ": malformed vertex");
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string token;
            while (ls >> token) {
                // "v", "v/vt", "v//vn", "v/vt/vn" — only the vertex index matters here.
                const auto slash = token.find('/');
                const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
                int v = 0;
                try {
                    v = std::stoi(head);
                } catch (const std::exception&) {
                    throw ParseError(path + ":" + std::to_string(line_no) + ": bad face index '" +
                                     token + "'");
                }
                if (v == 0)
                    throw ParseError(path + ":" + std::to_string(line_no) +
                                     ": face index 0 (OBJ indices are 1-based)");
                if (v < 0) v = static_cast<int>(mesh.vertices.size()) + v + 1;  // relative index
                if (v < 1 || v > static_cast<int>(mesh.vertices.size()))
                    throw ParseError(path + ":" + std::to_string(line_no) + ": face index " +
                                     std::to_string(v) + " out of range");
                idx.push_back(v - 1);
            }
            if (idx.size() < 3)
                throw ParseError(path + ":" + std::to_string(line_no) + ": face with <3 vertices");
            if (idx.size() > 3 && report) ++report->fan_triangulated_polygons;
            for (size_t k = 1; k + 1 < idx.size(); ++k)
                mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
        }
        // all other records skipped
    }
    validate_mesh(mesh);
    return mesh;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------- PLY

struct PlyProperty {
    std::string name;
    std::string type;       // scalar type, or list element type
    std::string count_type;  // non-empty for list properties
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    size_t count = 0;
    std::vector<PlyProperty> properties;
};

size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64" || type == "int64" || type == "uint64") return 8;
    throw ParseError("unknown PLY scalar type '" + type + "'");
}

double read_binary_scalar(std::istream& in, const std::string& type) {
    char buf[8];
    const size_t size = scalar_size(type);
    in.read(buf, static_cast<std::streamsize>(size));
    if (!in) throw ParseError("unexpected end of PLY payload");
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
    if (type == "char" || type == "int8") return buf[0];
    if (type == "uchar" || type == "uint8") return static_cast<uint8_t>(buf[0]);
    if (type == "short" || type == "int16") {
        int16_t v;
        std::memcpy(&v, buf, 2);
        return v;
    }
    if (type == "ushort" || type == "uint16") {
        uint16_t v;
        std::memcpy(&v, buf, 2);
        return v;
    }
    if (type == "int" || type == "int32") {
        int32_t v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "uint" || type == "uint32") {
        uint32_t v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "int64") {
        int64_t v;
        std::memcpy(&v, buf, 8);
        return static_cast<double>(v);
    }
    uint64_t v;
    std::memcpy(&v, buf, 8);
    return static_cast<double>(v);
}

double read_ascii_scalar(std::istream& in) {
    double v;
    if (!(in >> v)) throw ParseError("unexpected end of PLY payload");
    return v;
}

TriMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw ParseError(path + ": missing 'ply' magic");

    bool binary = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "comment" || tag == "obj_info") continue;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw ParseError(path + ": unsupported PLY format '" + fmt + "'");
        } else if (tag == "element") {
            PlyElement el;
            ls >> el.name >> el.count;
            elements.push_back(el);
        } else if (tag == "property") {
            if (elements.empty()) throw ParseError(path + ": property before element");
            PlyProperty prop;
            std::string first;
            ls >> first;
            if (first == "list") {
                prop.is_list = true;
                ls >> prop.count_type >> prop.type >> prop.name;
            } else {
                prop.type = first;
                ls >> prop.name;
            }
            elements.back().properties.push_back(prop);
        } else if (tag == "end_header") {
            break;
        } else if (!tag.empty()) {
            throw ParseError(path + ": unknown header record '" + tag + "'");
        }
    }

    TriMesh mesh;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int xi = -1, yi = -1, zi = -1;
            for (size_t p = 0; p < el.properties.size(); ++p) {
                if (el.properties[p].name == "x") xi = static_cast<int>(p);
                if (el.properties[p].name == "y") yi = static_cast<int>(p);
                if (el.properties[p].name == "z") zi = static_cast<int>(p);
            }
            if (xi < 0 || yi < 0 || zi < 0) throw ParseError(path + ": vertex element lacks x/y/z");
            mesh.vertices.reserve(el.count);
            std::vector<double> row(el.properties.size());
            for (size_t i = 0; i < el.count; ++i) {
                for (size_t p = 0; p < el.properties.size(); ++p) {
                    const auto& prop = el.properties[p];
                    if (prop.is_list) {
                        const double n = binary ? read_binary_scalar(in, prop.count_type)
                                                : read_ascii_scalar(in);
                        for (int k = 0; k < static_cast<int>(n); ++k) {
                            binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                        }
                        row[p] = 0;
                    } else {
                        row[p] = binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                    }
                }
                mesh.vertices.push_back(Vec3(row[xi], row[yi], row[zi]));
            }
        } else if (el.name == "face") {
            for (size_t i = 0; i < el.count; ++i) {
                for (const auto& prop : el.properties) {
                    if (prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        const double n = binary ? read_binary_scalar(in, prop.count_type)
                                                : read_ascii_scalar(in);
                        std::vector<int> idx;
                        for (int k = 0; k < static_cast<int>(n); ++k) {
                            const double v = binary ? read_binary_scalar(in, prop.type)
                                                    : read_ascii_scalar(in);
                            idx.push_back(static_cast<int>(v));
                        }
                        if (idx.size() < 3) throw ParseError(path + ": face with <3 vertices");
                        for (size_t k = 1; k + 1 < idx.size(); ++k)
                            mesh.faces.push_back({idx[0], idx[static_cast<int>(k)],
                                                  idx[static_cast<int>(k + 1)]});
                    } else if (prop.is_list) {
                        const double n = binary ? read_binary_scalar(in, prop.count_type)
                                                : read_ascii_scalar(in);
                        for (int k = 0; k < static_cast<int>(n); ++k)
                            binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                    } else {
                        binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                    }
                }
            }
        } else {
            // skip unknown element payload
            for (size_t i = 0; i < el.count; ++i) {
                for (const auto& prop : el.properties) {
                    if (prop.is_list) {
                        const double n = binary ? read_binary_scalar(in, prop.count_type)
                                                : read_ascii_scalar(in);
                        for (int k = 0; k < static_cast<int>(n); ++k)
                            binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                    } else {
                        binary ? read_binary_scalar(in, prop.type) : read_ascii_scalar(in);
                    }
                }
            }
        }
    }
    validate_mesh(mesh);
    return mesh;
}

void write_binary(std::ostream& out, const void* data, size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void save_ply(const TriMesh& mesh, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    if (binary) {
        for (const auto& v : mesh.vertices) {
            const double xyz[3] = {v.x(), v.y(), v.z()};
            write_binary(out, xyz, sizeof(xyz));
        }
        for (const auto& f : mesh.faces) {
            const uint8_t n = 3;
            write_binary(out, &n, 1);
            const int32_t idx[3] = {f[0], f[1], f[2]};
            write_binary(out, idx, sizeof(idx));
        }
    } else {
        out.precision(17);
        for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

TriMesh load_mesh(const std::string& path, LoadReport* report) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return load_obj(path, report);
    if (ext == "ply") return load_ply(path);
    throw ParseError("unsupported mesh extension '" + ext + "' for " + path);
}

void save_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format) {
    switch (format) {
        case MeshFormat::Obj: save_obj(mesh, path); break;
        case MeshFormat::PlyAscii: save_ply(mesh, path, false); break;
        case MeshFormat::PlyBinary: save_ply(mesh, path, true); break;
    }
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj")
        save_obj(mesh, path);
    else if (ext == "ply")
        save_ply(mesh, path, true);
    else
        throw IoError("unsupported mesh extension '" + ext + "' for " + path);
}

void save_point_cloud_ply(const std::vector<Vec3>& points,
                          const std::vector<Vec3>* normals,
                          const std::vector<double>* quality,
                          const std::string& path,
                          bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << points.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
    if (quality) out << "property double quality\n";
    out << "element face 0\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    for (size_t i = 0; i < points.size(); ++i) {
        if (binary) {
            const double xyz[3] = {points[i].x(), points[i].y(), points[i].z()};
            write_binary(out, xyz, sizeof(xyz));
            if (normals) {
                const double n[3] = {(*normals)[i].x(), (*normals)[i].y(), (*normals)[i].z()};
                write_binary(out, n, sizeof(n));
            }
            if (quality) write_binary(out, &(*quality)[i], sizeof(double));
        } else {
            out.precision(17);
            out << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
            if (normals)
                out << ' ' << (*normals)[i].x() << ' ' << (*normals)[i].y() << ' '
                    << (*normals)[i].z();
            if (quality) out << ' ' << (*quality)[i];
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace refmesh
