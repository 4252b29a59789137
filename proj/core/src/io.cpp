#include "resdiff/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace resdiff {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_samples_csv(std::ostream& os, const Tensor& batch) {
    const std::size_t w = batch.row_size();
    os << "id";
    for (std::size_t d = 0; d < w; ++d) os << ",dim" << d;
    os << '\n';
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        os << r;
        const double* p = batch.data() + r * w;
        for (std::size_t d = 0; d < w; ++d) os << ',' << format_g17(p[d]);
        os << '\n';
    }
}

void write_samples_csv(const std::string& path, const Tensor& batch) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_samples_csv(os, batch);
}

Tensor read_samples_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("id", 0) != 0) {
        throw std::runtime_error("samples CSV: missing header: " + path);
    }
    std::vector<double> data;
    std::size_t width = 0, rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // id column
        std::size_t w = 0;
        while (std::getline(ls, cell, ',')) {
            data.push_back(std::stod(cell));
            ++w;
        }
        if (width == 0) width = w;
        if (w != width) throw std::runtime_error("samples CSV: ragged row in " + path);
        ++rows;
    }
    if (rows == 0 || width == 0) throw std::runtime_error("samples CSV: no data in " + path);
    return Tensor(Shape{rows, width}, std::move(data));
}

void write_pgm(const std::string& path, const Tensor& image, std::size_t width,
               std::size_t height) {
    if (image.size() != width * height) {
        throw std::invalid_argument("write_pgm: image size " + std::to_string(image.size()) +
                                    " != " + std::to_string(width) + "x" + std::to_string(height));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "P5\n" << width << ' ' << height << "\n255\n";
    for (std::size_t i = 0; i < image.size(); ++i) {
        double q = std::lround((image[i] + 1.0) * 0.5 * 255.0);
        q = std::min(255.0, std::max(0.0, q));
        const unsigned char byte = static_cast<unsigned char>(q);
        os.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << content;
}

}  // namespace resdiff
