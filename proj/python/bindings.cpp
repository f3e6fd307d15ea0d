#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "treenhance/config.hpp"
#include "treenhance/error.hpp"
#include "treenhance/evaluator.hpp"
#include "treenhance/image.hpp"
#include "treenhance/metrics.hpp"
#include "treenhance/ops.hpp"
#include "treenhance/pipeline.hpp"

namespace py = pybind11;
using namespace trenh;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) {
        throw Error(ErrorKind::BadChannelCount, "expected an array of shape (H, W, 3)");
    }
    const auto h = static_cast<std::size_t>(arr.shape(0));
    const auto w = static_cast<std::size_t>(arr.shape(1));
    std::vector<float> data(arr.data(), arr.data() + h * w * 3);
    return Image(h, w, std::move(data));
}

FloatArray to_array(const Image& img) {
    FloatArray out({img.height(), img.width(), std::size_t{3}});
    std::memcpy(out.mutable_data(), img.data().data(), img.size() * sizeof(float));
    return out;
}

py::dict result_dict(const EnhanceResult& r) {
    py::dict d;
    d["image"] = to_array(r.image);
    d["sequence"] = r.sequence;
    d["values"] = r.per_step_values;
    d["return"] = r.achieved_return ? py::cast(*r.achieved_return) : py::none();
    return d;
}

std::unique_ptr<Evaluator> make_evaluator(const Catalog& cat, const std::string& model) {
    if (model.empty()) return std::make_unique<UniformEvaluator>(cat.size());
    auto params = std::make_shared<const EvaluatorParams>(load_params(model));
    check_catalog(*params, cat);
    return std::make_unique<NetworkEvaluator>(std::move(params));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tree-search image enhancement core";

    static py::exception<Error> error_type(m, "TreenhanceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.def("load_image", [](const std::string& path) { return to_array(load_image(path)); },
          py::arg("path"));
    m.def("save_image",
          [](const FloatArray& img, const std::string& path) { save_image(to_image(img), path); },
          py::arg("image"), py::arg("path"));

    m.def("catalog_size", [](const std::string& name) { return catalog(name).size(); },
          py::arg("catalog") = "lol");
    m.def(
        "list_operations",
        [](const std::string& name) {
            const Catalog cat = catalog(name);
            py::list out;
            for (const Operation& op : cat.ops()) {
                py::dict d;
                d["id"] = op.id;
                d["family"] = std::string(to_string(op.family));
                d["channel"] = std::string(to_string(op.channel));
                d["param"] = op.param;
                d["terminal"] = op.terminal;
                out.append(d);
            }
            return out;
        },
        py::arg("catalog") = "lol");

    m.def(
        "apply",
        [](const FloatArray& img, int id, const std::string& cat) {
            const Catalog c = catalog(cat);
            if (id < 0 || static_cast<std::size_t>(id) >= c.size()) {
                throw Error(ErrorKind::UnknownOperation, "operation id " + std::to_string(id));
            }
            return to_array(apply(c[static_cast<std::size_t>(id)], to_image(img)));
        },
        py::arg("image"), py::arg("op_id"), py::arg("catalog") = "lol");
    m.def(
        "apply_sequence",
        [](const FloatArray& img, const std::vector<int>& ids, const std::string& cat) {
            return to_array(apply_sequence(catalog(cat), ids, to_image(img)));
        },
        py::arg("image"), py::arg("sequence"), py::arg("catalog") = "lol");

    m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(to_image(a), to_image(b)); });
    m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); });
    m.def("delta_e",
          [](const FloatArray& a, const FloatArray& b) { return delta_e(to_image(a), to_image(b)); });
    m.def(
        "return_value",
        [](const FloatArray& x, const FloatArray& target, double alpha) {
            ReturnConfig cfg;
            cfg.alpha = alpha;
            return return_r(to_image(x), to_image(target), cfg);
        },
        py::arg("image"), py::arg("target"), py::arg("alpha") = ReturnConfig{}.alpha);

    m.def(
        "enhance_guided",
        [](const FloatArray& input, const FloatArray& target, const std::string& cat,
           std::size_t budget, std::uint64_t seed, const std::string& model) {
            RunConfig run = RunConfig::preset(cat == "fivek" ? "fivek" : "lol");
            run.seed = seed;
            SearchConfig cfg = run.guided_search(budget);
            const Catalog c = catalog(cat);
            const auto ev = model.empty() ? nullptr : make_evaluator(c, model);
            return result_dict(infer_guided(to_image(input), to_image(target), c, ev.get(), cfg));
        },
        py::arg("input"), py::arg("target"), py::arg("catalog") = "lol", py::arg("budget") = 5000,
        py::arg("seed") = 0, py::arg("model") = "");

    m.def(
        "enhance",
        [](const FloatArray& input, const std::string& model, const std::string& mode,
           std::size_t max_depth, std::size_t iterations, std::uint64_t seed) {
            auto params = std::make_shared<const EvaluatorParams>(load_params(model));
            const Catalog c = catalog(params->arch.catalog);
            check_catalog(*params, c);
            const NetworkEvaluator ev(params);
            const Image img = to_image(input);
            if (mode == "policy") return result_dict(infer_policy(img, c, ev, max_depth));
            if (mode != "tree") throw Error(ErrorKind::InvalidArgument, "mode must be tree or policy");
            SearchConfig cfg;
            cfg.mode = SearchMode::Infer;
            cfg.max_depth = max_depth;
            cfg.iterations = iterations;
            cfg.seed = seed;
            return result_dict(infer_tree(img, c, ev, cfg));
        },
        py::arg("input"), py::arg("model"), py::arg("mode") = "tree", py::arg("max_depth") = 10,
        py::arg("iterations") = 1000, py::arg("seed") = 0);
}
