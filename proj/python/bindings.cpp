#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "hdcg/baselines.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/inspection.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"
#include "hdcg/rating.hpp"
#include "hdcg/training.hpp"

namespace py = pybind11;
using namespace hdcg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2D array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return Image(h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Image& img) {
    Array out({img.height(), img.width()});
    std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
    return out;
}

BScan to_bscan(const Array& a) { return BScan(to_image(a), Domain::HighNoise); }

Mask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2D mask");
    Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) m.set(y, x, a.at(y, x));
    return m;
}

py::array_t<bool> from_mask(const Mask& m) {
    py::array_t<bool> out({m.height(), m.width()});
    auto v = out.mutable_unchecked<2>();
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) v(y, x) = m(y, x);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the hdcyclegan package";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<MaskExtractionError>(m, "MaskExtractionError", data_error.ptr());
    py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, int frames_hn, int frames_ln, int height, int width) {
            PhantomConfig cfg;
            cfg.height = height;
            cfg.width = width;
            const PhantomSample s = generate_phantom(cfg, frames_hn, frames_ln, seed);
            py::dict d;
            d["clean"] = to_array(s.clean.pixels());
            d["hn"] = to_array(s.hn.pixels());
            d["ln"] = to_array(s.ln.pixels());
            d["top_boundary"] = s.top_boundary;
            d["bottom_boundary"] = s.bottom_boundary;
            return d;
        },
        py::arg("seed"), py::arg("frames_hn") = 12, py::arg("frames_ln") = 60, py::arg("height") = 64,
        py::arg("width") = 64);

    m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
    m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
    m.def(
        "register_translation",
        [](const Array& ref, const Array& moving, bool subpixel) {
            const Shift s = register_translation(to_image(ref), to_image(moving), subpixel);
            return py::make_tuple(s.dy, s.dx, s.peak_confidence);
        },
        py::arg("ref"), py::arg("moving"), py::arg("subpixel") = false);
    m.def("extract_masks", [](const Array& img) {
        const MaskPair p = extract_masks(to_image(img));
        return py::make_tuple(from_mask(p.retina), from_mask(p.signal), from_mask(p.background));
    });
    m.def("cnr", [](const Array& img, const py::array_t<bool>& signal, const py::array_t<bool>& background) {
        return cnr(to_image(img), to_mask(signal), to_mask(background));
    });
    m.def("msr", [](const Array& img, const py::array_t<bool>& signal) { return msr(to_image(img), to_mask(signal)); });

    m.def("baseline_names", &baseline_names);
    m.def("estimate_noise_sigma", [](const Array& img) { return estimate_noise_sigma(to_image(img)); });
    m.def(
        "baseline",
        [](const std::string& name, const Array& img, const std::string& params_json) {
            BaselineParams params;
            if (!params_json.empty()) params = nlohmann::json::parse(params_json).get<BaselineParams>();
            return to_array(run_baseline(name, to_bscan(img), params).output.pixels());
        },
        py::arg("name"), py::arg("img"), py::arg("params_json") = "");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("epoch", &Checkpoint::epoch)
        .def_readonly("step", &Checkpoint::step)
        .def("layer_names", [](const Checkpoint& c) { return c.model.gen_l.layer_names(); });
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });
    m.def("denoise", [](const Checkpoint& c, const Array& img) { return to_array(denoise(c, to_bscan(img)).pixels()); });
    m.def("feature_maps", [](const Checkpoint& c, const Array& img, const std::string& layer) {
        std::vector<Array> out;
        for (const auto& map : extract_feature_maps(c, to_bscan(img), layer).maps) out.push_back(to_array(map));
        return out;
    });

    m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
    m.def("presentation_orders", &presentation_orders);
}
