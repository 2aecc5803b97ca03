#include "flis/config.hpp"
#include "flis/error.hpp"
#include "flis/evaluation.hpp"
#include "flis/model_io.hpp"
#include "flis/numerics.hpp"
#include "flis/pipeline.hpp"
#include "flis/synthdata.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

namespace py = pybind11;
using namespace flis;

namespace {

// Stacks cross the boundary as C-contiguous (T, H, W) arrays.
template <class G, class T>
std::vector<G> from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a, const char* what) {
    if (a.ndim() != 3) throw InvalidArgument(std::string(what) + " must be a (slices, height, width) array");
    const int T_ = static_cast<int>(a.shape(0)), h = static_cast<int>(a.shape(1)), w = static_cast<int>(a.shape(2));
    std::vector<G> out;
    out.reserve(static_cast<size_t>(T_));
    const T* p = a.data();
    for (int t = 0; t < T_; ++t) {
        G g(w, h);
        for (size_t i = 0; i < g.size(); ++i) g.data[i] = static_cast<typename decltype(g.data)::value_type>(*p++);
        out.push_back(std::move(g));
    }
    return out;
}

template <class T, class G>
py::array_t<T> to_array(const std::vector<G>& s) {
    const py::ssize_t T_ = static_cast<py::ssize_t>(s.size());
    const py::ssize_t h = s.empty() ? 0 : s[0].height, w = s.empty() ? 0 : s[0].width;
    py::array_t<T> out({T_, h, w});
    T* p = out.mutable_data();
    for (const auto& g : s)
        for (auto v : g.data) *p++ = static_cast<T>(v);
    return out;
}

PatientStack patient(const py::dict& d) {
    PatientStack s;
    s.images = from_array<Slice>(py::array_t<double, py::array::c_style | py::array::forcecast>(d["images"]), "images");
    if (d.contains("labels"))
        s.labels = from_array<LabelMap>(py::array_t<uint8_t, py::array::c_style | py::array::forcecast>(d["labels"]),
                                        "labels");
    if (d.contains("masks") && !d["masks"].is_none())
        s.masks =
            from_array<Mask>(py::array_t<uint8_t, py::array::c_style | py::array::forcecast>(d["masks"]), "masks");
    return s;
}

TrainConfig config_from(const std::map<std::string, std::string>& settings) {
    RunConfig rc;
    for (const auto& [k, v] : settings) apply_setting(rc, k, v);
    return rc.train;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings for the flis_core library";

    static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
    static py::exception<InputError> input_error(m, "InputError", PyExc_OSError);
    static py::exception<DegenerateClass> degenerate(m, "DegenerateClassError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const FormatError& e) {
            format_error(e.what());
        } catch (const InputError& e) {
            input_error(e.what());
        } catch (const DegenerateClass& e) {
            degenerate(e.what());
        }
    });

    py::class_<Model>(m, "Model")
        .def_property_readonly("method", [](const Model& x) { return to_string(x.method()); })
        .def_property_readonly("partitions", &Model::P)
        .def_property_readonly("feature_dim", &Model::feature_dim)
        .def_property_readonly("atoms", &Model::atoms)
        .def_property_readonly("config", [](const Model& x) {
            RunConfig rc;
            rc.train = x.config;
            return to_text(rc);
        })
        .def("dictionary", [](const Model& x, int p) { return x.parts.at(static_cast<size_t>(p)).D; }, py::arg("p"))
        .def("classifier", [](const Model& x, int p) { return x.parts.at(static_cast<size_t>(p)).W; }, py::arg("p"))
        .def("to_bytes", [](const Model& x) { return py::bytes(model_io::serialize(x)); })
        .def_static("from_bytes", [](const py::bytes& b) { return model_io::deserialize(std::string(b)); })
        .def("save", [](const Model& x, const std::string& path) { model_io::save_model(x, path); })
        .def_static("load", [](const std::string& path) { return model_io::load_model(path); })
        .def("checksum", [](const Model& x) { return model_io::checksum(model_io::serialize(x)); })
        .def("__eq__", [](const Model& a, const Model& b) { return a == b; });

    m.def(
        "train",
        [](const py::list& stacks, const std::map<std::string, std::string>& settings) {
            std::vector<PatientStack> v;
            for (const auto& s : stacks) v.push_back(patient(s.cast<py::dict>()));
            const TrainConfig cfg = config_from(settings);
            py::gil_scoped_release release;
            return train(v, cfg);
        },
        py::arg("stacks"), py::arg("settings") = std::map<std::string, std::string>{},
        "Train on a list of dicts with 'images', 'labels' and optional 'masks'. "
        "Settings use the config-file keys, values as strings.");

    m.def(
        "segment",
        [](const Model& model, const py::array& images, const py::object& masks) {
            const CtStack st =
                from_array<Slice>(py::array_t<double, py::array::c_style | py::array::forcecast>(images), "images");
            MaskStack ms;
            if (!masks.is_none())
                ms = from_array<Mask>(py::array_t<uint8_t, py::array::c_style | py::array::forcecast>(masks), "masks");
            Segmentation seg;
            {
                py::gil_scoped_release release;
                seg = segment(model, st, masks.is_none() ? nullptr : &ms);
            }
            return to_array<uint8_t>(seg.labels);
        },
        py::arg("model"), py::arg("images"), py::arg("masks") = py::none());

    m.def(
        "phantom",
        [](uint64_t seed, int slices, int size, double noise) {
            synth::PhantomSpec spec;
            spec.seed = seed;
            spec.slices = slices;
            spec.width = spec.height = size;
            spec.noise_sigma = noise;
            const synth::Phantom p = synth::generate(spec);
            py::dict d;
            d["images"] = to_array<double>(p.images);
            d["labels"] = to_array<uint8_t>(p.labels);
            d["masks"] = to_array<uint8_t>(p.masks);
            return d;
        },
        py::arg("seed") = 7, py::arg("slices") = 24, py::arg("size") = 128, py::arg("noise") = 0.05);

    m.def(
        "dice",
        [](const py::array& pred, const py::array& truth, int label) {
            using A = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;
            return eval::dice(from_array<LabelMap>(A(pred), "pred"), from_array<LabelMap>(A(truth), "truth"),
                              static_cast<uint8_t>(label));
        },
        py::arg("pred"), py::arg("truth"), py::arg("label"));

    m.def(
        "estimate",
        [](double N, double K, double K_mem, double d, double L, double Ix, double Iy, double Nt) {
            eval::CostParams ops;
            ops.N = N;
            ops.K = K;
            ops.d = d;
            ops.L = L;
            ops.Ix = Ix;
            ops.Iy = Iy;
            ops.Nt = Nt;
            eval::CostParams mem = ops;
            mem.K = K_mem;
            eval::CostParams half = mem;
            half.d = d / 2;
            return std::map<std::string, double>{{"C_FLIS", eval::ops_flis(ops)},
                                                 {"C_DDLS", eval::ops_ddls(ops)},
                                                 {"M_FLIS", eval::mem_flis(mem)},
                                                 {"M_FLIS_intensity_only", eval::mem_flis(half)},
                                                 {"M_DDLS", eval::mem_ddls(mem)},
                                                 {"M_SRC", eval::mem_src(mem)}};
        },
        py::arg("N") = 4700, py::arg("K") = 120, py::arg("K_mem") = 80, py::arg("d") = 242, py::arg("L") = 5,
        py::arg("Ix") = 512, py::arg("Iy") = 512, py::arg("Nt") = 15);

    m.def("omp", &numerics::omp_batch, py::arg("D"), py::arg("Y"), py::arg("L"),
          "Batch OMP; D needs unit-norm columns.");
    m.def("nonneg_lasso", &numerics::nonneg_lasso, py::arg("D"), py::arg("m"), py::arg("lam"));
}
