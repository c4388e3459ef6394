#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <torch/torch.h>

#include <opencv2/core.hpp>

#include "inclg/config.hpp"
#include "inclg/data.hpp"
#include "inclg/errors.hpp"
#include "inclg/inference.hpp"
#include "inclg/landmarks.hpp"
#include "inclg/losses.hpp"
#include "inclg/metrics.hpp"
#include "inclg/search.hpp"
#include "inclg/trainer.hpp"

namespace py = pybind11;
using namespace inclg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const FloatArray& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat).clone();
}

FloatArray to_array(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat).contiguous();
  FloatArray out(std::vector<py::ssize_t>(c.sizes().begin(), c.sizes().end()));
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), c.numel() * sizeof(float));
  return out;
}

cv::Mat to_mat(const ByteArray& a, int channels) {
  if (channels == 3 && (a.ndim() != 3 || a.shape(2) != 3)) throw ShapeError("image must be HxWx3 uint8");
  if (channels == 1 && a.ndim() != 2) throw ShapeError("mask must be HxW uint8");
  return cv::Mat(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), CV_8UC(channels),
                 const_cast<std::uint8_t*>(a.data()))
      .clone();
}

ByteArray from_mat(const cv::Mat& m) {
  std::vector<py::ssize_t> shape{m.rows, m.cols};
  if (m.channels() > 1) shape.push_back(m.channels());
  ByteArray out(shape);
  const cv::Mat c = m.isContinuous() ? m : m.clone();
  std::memcpy(out.mutable_data(), c.data, c.total() * c.elemSize());
  return out;
}

std::optional<std::string> group_of(double ratio) {
  const auto g = assign_group(ratio);
  return g ? std::optional("G" + std::to_string(static_cast<int>(*g) + 1)) : std::nullopt;
}

py::dict native_result(const NativeResult& r) {
  py::dict d;
  d["image"] = from_mat(r.image);
  d["landmarks"] = std::vector<float>(r.landmarks.values.begin(), r.landmarks.values.end());
  d["latency_ms"] = r.latency_ms;
  d["model_id"] = r.model_id;
  d["no_op"] = r.no_op;
  d["warnings"] = r.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_inclg, m) {
  m.doc() = "Multi-task face inpainting core";
  m.attr("__version__") = INCLG_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

  m.def("rasterize_landmarks", [](const FloatArray& landmarks, int size, int copies) {
    return to_array(rasterize_landmarks(to_tensor(landmarks), size, copies));
  }, py::arg("landmarks"), py::arg("size") = 128, py::arg("copies") = 68);

  m.def("composite", [](const FloatArray& generated, const FloatArray& original, const FloatArray& mask) {
    return to_array(composite(to_tensor(generated), to_tensor(original), to_tensor(mask)));
  }, py::arg("generated"), py::arg("original"), py::arg("mask"));

  m.def("pixel_loss", [](const FloatArray& generated, const FloatArray& target) {
    return pixel_loss(to_tensor(generated), to_tensor(target)).item<double>();
  });
  m.def("landmark_loss", [](const FloatArray& predicted, const FloatArray& target) {
    return landmark_loss(to_tensor(predicted), to_tensor(target)).item<double>();
  });
  m.def("tv_loss", [](const FloatArray& image) { return tv_loss(to_tensor(image)).item<double>(); });
  m.def("masked_psnr", [](const FloatArray& output, const FloatArray& target, const FloatArray& mask) {
    return masked_psnr(to_tensor(output), to_tensor(target), to_tensor(mask));
  });

  m.def("mask_ratio", [](const std::filesystem::path& path) { return mask_ratio(load_mask_native(path)); });
  m.def("assign_group", &group_of, "Group label (G1/G2/G3) for a hole ratio, or None when discarded.");
  m.def("build_flist", [](const std::filesystem::path& root) {
    std::vector<std::string> out;
    for (const auto& p : build_flist(root)) out.push_back(p.string());
    return out;
  });
  m.def("load_landmarks", [](const std::filesystem::path& path) {
    const auto l = load_landmarks(path);
    return std::vector<float>(l.values.begin(), l.values.end());
  });
  m.def("derive_seed", &derive_seed, py::arg("master_seed"), py::arg("index"));

  m.def("write_untrained_checkpoint", [](const std::string& config_text, const std::filesystem::path& path) {
    GanTrainer::create(parse_config(config_text)).save_checkpoint(path);
  }, py::arg("config_text"), py::arg("path"), "Initialises a trainer from YAML text and saves it at iteration 0.");

  py::class_<InpaintingModel, std::shared_ptr<InpaintingModel>>(m, "Model")
      .def_static("load", &InpaintingModel::load, py::arg("checkpoint"))
      .def_property_readonly("model_id", &InpaintingModel::model_id)
      .def_property_readonly("image_size", &InpaintingModel::image_size)
      .def("infer", [](const InpaintingModel& model, const ByteArray& image, const ByteArray& mask) {
        NativeResult r;
        {
          const auto img = to_mat(image, 3), msk = to_mat(mask, 1);
          py::gil_scoped_release release;
          r = model.infer_native(img, msk);
        }
        return native_result(r);
      }, py::arg("image"), py::arg("mask"),
      "image: HxWx3 uint8 RGB, mask: HxW uint8 (> 127 = hole). Returns a dict with the composited image.");
}
