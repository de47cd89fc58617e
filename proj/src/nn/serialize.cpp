#include "facemotion/nn/serialize.hpp"

#include <istream>
#include <ostream>

namespace facemotion::nn {

namespace {
void write_u32(std::ostream& out, uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw IntegrityError("tensor blob truncated");
    }
    return static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
           (static_cast<uint32_t>(buf[2]) << 16) | (static_cast<uint32_t>(buf[3]) << 24);
}
}  // namespace

void write_params(std::ostream& out, const ParamList& params) {
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (const Param* p : params) {
        write_u32(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(out, static_cast<uint32_t>(p->value.rows()));
        write_u32(out, static_cast<uint32_t>(p->value.cols()));
        // Eigen default storage is column-major; dump raw in that order.
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
}

void read_params(std::istream& in, const ParamList& params) {
    const uint32_t count = read_u32(in);
    if (count != params.size()) {
        throw IntegrityError("parameter count mismatch");
    }
    for (Param* p : params) {
        const uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in || name != p->name) {
            throw IntegrityError("parameter name mismatch: expected " + p->name);
        }
        const uint32_t rows = read_u32(in);
        const uint32_t cols = read_u32(in);
        if (rows != p->value.rows() || cols != p->value.cols()) {
            throw IntegrityError("parameter shape mismatch for " + p->name);
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) * p->value.size()));
        if (!in) {
            throw IntegrityError("tensor blob truncated");
        }
        p->reset_state();
    }
}

}  // namespace facemotion::nn
