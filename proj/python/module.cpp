#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ganblend/blend.hpp"
#include "ganblend/checkpoint.hpp"
#include "ganblend/generator.hpp"
#include "ganblend/grid.hpp"
#include "ganblend/png_io.hpp"
#include "ganblend/projector.hpp"
#include "ganblend/topology.hpp"

namespace py = pybind11;
using namespace ganblend;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  py::array_t<float> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<float> to_vector(const FloatArray& a) {
  return {a.data(), a.data() + a.size()};
}

Image to_image(const FloatArray& a) {
  if (a.ndim() != 3) throw Error(ErrorKind::Shape, "image array must be [3, H, W]");
  Shape dims(a.shape(), a.shape() + a.ndim());
  return Image(Tensor(dims, to_vector(a)));
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::span<const std::uint8_t> byte_span(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

GeneratorConfig config_or_default(const std::optional<std::string>& json) {
  return json ? config_from_json(*json) : GeneratorConfig{};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core bindings of the ganblend toolkit";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      err.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", [](const std::string& path) { return load(path); }, py::arg("path"))
      .def_static(
          "from_bytes", [](py::bytes data) { return decode_gwtc(byte_span(std::string_view(data))); },
          py::arg("data"))
      .def("save", [](const Checkpoint& c, const std::string& path) { save(c, path); },
           py::arg("path"))
      .def("to_bytes", [](const Checkpoint& c) { return to_bytes(encode_gwtc(c)); })
      .def_property_readonly("config_json", [](const Checkpoint& c) { return config_to_json(c.meta()); })
      .def_property_readonly("max_resolution",
                             [](const Checkpoint& c) { return c.meta().max_resolution; })
      .def("names",
           [](const Checkpoint& c) {
             std::vector<std::string> names;
             for (const auto& [name, _] : c.params()) names.push_back(name);
             return names;
           })
      .def("param", [](const Checkpoint& c, const std::string& name) { return to_numpy(c.param(name)); },
           py::arg("name"))
      .def("__len__", &Checkpoint::size)
      .def("bit_equal", [](const Checkpoint& a, const Checkpoint& b) { return bit_equal(a, b); });

  m.def(
      "classify",
      [](const std::string& name) {
        const auto key = classify(name);
        return py::make_tuple(std::string(to_string(key.stage)), key.resolution,
                              std::string(to_string(key.role)));
      },
      py::arg("name"), "(stage, resolution or None, role) of a parameter name");

  m.def("init_random",
        [](std::uint64_t seed, std::optional<std::string> config_json) {
          return init_random(config_or_default(config_json), seed);
        },
        py::arg("seed") = 0, py::arg("config_json") = py::none());
  m.def("synth_transfer", &synth_transfer, py::arg("base"), py::arg("strength") = 0.5f,
        py::arg("seed") = 1);

  m.def("blend",
        [](const Checkpoint& base, const Checkpoint& transfer, const std::string& schedule_json,
           const std::string& mapping) {
          return blend_checkpoints(base, transfer, schedule_from_json(schedule_json),
                                   mapping_policy_from_string(mapping));
        },
        py::arg("base"), py::arg("transfer"), py::arg("schedule_json"), py::arg("mapping") = "base");

  m.def("describe_schedule",
        [](const std::string& schedule_json, std::optional<std::string> config_json) {
          std::vector<std::pair<int, float>> rows;
          for (const auto& r : describe_schedule(schedule_from_json(schedule_json),
                                                 config_or_default(config_json))) {
            rows.emplace_back(r.resolution, r.alpha);
          }
          return rows;
        },
        py::arg("schedule_json"), py::arg("config_json") = py::none());

  m.def("sample_latent",
        [](const Checkpoint& c, std::uint64_t seed, std::size_t index) {
          const auto z = sample_latent(c.meta(), seed, index);
          return py::array_t<float>(static_cast<py::ssize_t>(z.size()), z.data());
        },
        py::arg("model"), py::arg("seed"), py::arg("index") = 0);

  m.def("forward",
        [](const Checkpoint& c, const FloatArray& z, std::uint64_t noise_seed) {
          const auto zv = to_vector(z);
          Image img;
          {
            py::gil_scoped_release release;
            img = forward(c, zv, NoiseSpec{noise_seed});
          }
          return to_numpy(img.pixels());
        },
        py::arg("model"), py::arg("z"), py::arg("noise_seed") = 0);
  m.def("synthesize",
        [](const Checkpoint& c, const FloatArray& w, std::uint64_t noise_seed) {
          const auto wv = to_vector(w);
          Image img;
          {
            py::gil_scoped_release release;
            img = synthesize(c, wv, NoiseSpec{noise_seed});
          }
          return to_numpy(img.pixels());
        },
        py::arg("model"), py::arg("w"), py::arg("noise_seed") = 0);
  m.def("activations",
        [](const Checkpoint& c, const FloatArray& z, std::uint64_t noise_seed, int tap_r) {
          return to_numpy(activations(c, to_vector(z), NoiseSpec{noise_seed}, tap_r));
        },
        py::arg("model"), py::arg("z"), py::arg("noise_seed"), py::arg("tap_r"));

  m.def("sample_grid_png",
        [](const Checkpoint& c, std::uint64_t seed, int count, int columns) {
          SampleGridSpec spec{seed, count, columns};
          spec.validate();
          std::vector<std::uint8_t> png;
          {
            py::gil_scoped_release release;
            png = encode_png_bytes(sample_grid(c, spec));
          }
          return to_bytes(png);
        },
        py::arg("model"), py::arg("seed") = 0, py::arg("count") = 24, py::arg("columns") = 6);

  m.def("encode_png", [](const FloatArray& image) { return to_bytes(encode_png_bytes(to_raster(to_image(image)))); },
        py::arg("image"));
  m.def("decode_png",
        [](py::bytes data) { return to_numpy(from_raster(decode_png_bytes(byte_span(std::string_view(data)))).pixels()); },
        py::arg("data"));

  m.def("project",
        [](const Checkpoint& c, const FloatArray& target, const std::string& cfg_json) {
          const auto cfg = projection_config_from_json(cfg_json);
          const Image img = to_image(target);
          ProjectionResult r;
          {
            py::gil_scoped_release release;
            r = project(c, img, cfg);
          }
          py::dict out;
          out["space"] = std::string(to_string(r.space));
          out["latent"] = py::array_t<float>(static_cast<py::ssize_t>(r.latent.size()), r.latent.data());
          out["loss_trace"] = r.loss_trace;
          out["reconstruction"] = to_numpy(r.reconstruction.pixels());
          out["final_loss"] = r.final_loss;
          return out;
        },
        py::arg("model"), py::arg("target"), py::arg("cfg_json") = "{}");
  m.def("toonify",
        [](const Checkpoint& base, const Checkpoint& blended, const FloatArray& target,
           const std::string& cfg_json) {
          const auto cfg = projection_config_from_json(cfg_json);
          const Image img = to_image(target);
          Image out;
          {
            py::gil_scoped_release release;
            out = toonify(base, blended, img, cfg);
          }
          return to_numpy(out.pixels());
        },
        py::arg("base"), py::arg("blended"), py::arg("target"), py::arg("cfg_json") = "{}");
}
