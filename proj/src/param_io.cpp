#include "vpgmm/param_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace vpgmm {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_real(std::istream& in, const char* what) {
    double v;
    if (!(in >> v)) throw IoError(std::string("params: missing or malformed ") + what);
    return v;
}

} // namespace

void write_params(std::ostream& out, const GmmParams& params, const Dims& dims) {
    const int j_count = params.components();
    const int d = params.dim();
    if (d != dims.dim() || j_count != dims.num_components)
        throw ValidationError("write_params: dims do not match parameter shapes");

    out << "vpgmm-params v1 " << dims.num_farms << ' ' << dims.num_periods << ' '
        << dims.num_obs << ' ' << dims.num_components << '\n';
    for (int j = 0; j < j_count; ++j)
        out << fmt17(params.weights[j]) << (j + 1 == j_count ? '\n' : ' ');
    for (int j = 0; j < j_count; ++j) {
        for (int a = 0; a < d; ++a)
            out << fmt17(params.means[j][a]) << (a + 1 == d ? '\n' : ' ');
    }
    for (int j = 0; j < j_count; ++j) {
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b)
                out << fmt17(params.covariances[j](a, b)) << (b + 1 == d ? '\n' : ' ');
        }
    }
}

void write_params_file(const std::filesystem::path& path, const GmmParams& params, const Dims& dims) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_params(out, params, dims);
    if (!out) throw IoError("failed while writing " + path.string());
}

LoadedParams read_params(std::istream& in) {
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "vpgmm-params" || version != "v1")
        throw IoError("params: bad header, expected 'vpgmm-params v1'");

    LoadedParams loaded;
    Dims& dims = loaded.dims;
    if (!(in >> dims.num_farms >> dims.num_periods >> dims.num_obs >> dims.num_components))
        throw IoError("params: bad header counts");
    dims.validate();

    const int j_count = dims.num_components;
    const int d = dims.dim();
    GmmParams& params = loaded.params;
    params.weights.resize(j_count);
    params.means.assign(j_count, Eigen::VectorXd(d));
    params.covariances.assign(j_count, Eigen::MatrixXd(d, d));

    for (int j = 0; j < j_count; ++j) params.weights[j] = parse_real(in, "weight");
    for (int j = 0; j < j_count; ++j)
        for (int a = 0; a < d; ++a) params.means[j][a] = parse_real(in, "mean");
    for (int j = 0; j < j_count; ++j)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) params.covariances[j](a, b) = parse_real(in, "covariance");

    params.refresh_cache();
    return loaded;
}

LoadedParams read_params_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_params(in);
}

} // namespace vpgmm
