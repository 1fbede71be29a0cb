#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>
#include <optional>

#include "radfuse/deepfeat.hpp"
#include "radfuse/evalmetrics.hpp"
#include "radfuse/handcrafted.hpp"
#include "radfuse/pipeline.hpp"
#include "radfuse/preprocess.hpp"
#include "radfuse/rff.hpp"
#include "radfuse/stats.hpp"

namespace py = pybind11;
using namespace radfuse;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GrayImage to_gray(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D uint8 array");
  GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.size());
  return img;
}

U8Array from_gray(const GrayImage& img) {
  U8Array out({img.height, img.width});
  std::memcpy(out.mutable_data(), img.data.data(), img.size());
  return out;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

std::vector<FeatureGroup> parse_groups(const std::optional<std::vector<std::string>>& names) {
  if (!names) return {kAllGroups.begin(), kAllGroups.end()};
  std::vector<FeatureGroup> out;
  for (const auto& n : *names) out.push_back(parse_group(n));
  return canonical_groups(out);
}

GlcmDirection glcm_direction(int degrees) {
  switch (degrees) {
    case 0: return GlcmDirection::deg0;
    case 45: return GlcmDirection::deg45;
    case 90: return GlcmDirection::deg90;
    case 135: return GlcmDirection::deg135;
  }
  throw py::value_error("direction must be 0, 45, 90 or 135");
}

GldmDirection gldm_direction(int degrees) {
  switch (degrees) {
    case 0: return GldmDirection::deg0;
    case 90: return GldmDirection::deg90;
    case 180: return GldmDirection::deg180;
    case 270: return GldmDirection::deg270;
  }
  throw py::value_error("direction must be 0, 90, 180 or 270");
}

ConfusionMatrix confusion_from(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(0) != kNumClasses || a.shape(1) != kNumClasses) {
    throw py::value_error("expected a 3x3 confusion matrix");
  }
  ConfusionMatrix cm;
  for (int r = 0; r < kNumClasses; ++r) {
    for (int c = 0; c < kNumClasses; ++c) {
      if (a.at(r, c) < 0) throw py::value_error("negative count");
      cm.counts[r][c] = static_cast<std::uint64_t>(a.at(r, c));
    }
  }
  return cm;
}

py::dict prediction_dict(const Prediction& p) {
  py::dict d;
  d["label"] = std::string(to_string(p.label));
  py::dict scores;
  for (int c = 0; c < kNumClasses; ++c) scores[py::str(std::string(to_string(class_from_index(c))))] = p.scores[c];
  d["scores"] = scores;
  return d;
}

class Model {
public:
  Model(const std::filesystem::path& path, std::optional<std::filesystem::path> deep_features)
      : model_(load_model(path)) {
    if (model_.deep) {
      DeepConfig deep = *model_.deep;
      if (deep_features) deep.feature_path = *deep_features;
      provider_ = make_provider(deep, model_.preprocess);
    }
  }

  const PipelineModel& model() const { return model_; }

  py::dict predict(const std::filesystem::path& image, const std::string& id) const {
    Prediction p;
    {
      py::gil_scoped_release release;
      p = radfuse::predict(model_, image, provider_.get(), id);
    }
    return prediction_dict(p);
  }

private:
  PipelineModel model_;
  std::unique_ptr<DeepFeatureProvider> provider_;
};

}  // namespace

PYBIND11_MODULE(_radfuse, m) {
  m.doc() = "Handcrafted and deep feature fusion for three-class chest X-ray classification.";

  static py::handle error_type = py::exception<Error>(m, "RadfuseError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("STAT_NAMES") = std::vector<std::string>(kStatNames.begin(), kStatNames.end());
  m.attr("GROUPS") = [] {
    std::vector<std::string> names;
    for (auto g : kAllGroups) names.emplace_back(to_string(g));
    return names;
  }();
  m.attr("CLASSES") = std::vector<std::string>{"covid", "normal", "pneumonia"};

  m.def(
      "compute_stats",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> p) {
        const auto s = compute_stats(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
        const auto values = s.to_array();
        py::dict d;
        for (std::size_t k = 0; k < kNumStats; ++k) d[py::str(std::string(kStatNames[k]))] = values[k];
        return d;
      },
      py::arg("values"));

  m.def("load_gray", [](const std::filesystem::path& path) { return from_gray(to_grayscale(load_image(path))); },
        py::arg("path"));
  m.def("preprocess_image",
        [](const std::filesystem::path& path) { return from_gray(preprocess_image(path).gray); },
        py::arg("path"), "Decoded, grayscaled, resized to 224x224 and CLAHE-equalized.");
  m.def(
      "resize",
      [](const U8Array& img, int width, int height) { return from_gray(resize_bilinear(to_gray(img), width, height)); },
      py::arg("image"), py::arg("width") = kImageSize, py::arg("height") = kImageSize);
  m.def(
      "clahe",
      [](const U8Array& img, int tiles_x, int tiles_y, double clip_limit) {
        ClaheConfig cfg;
        cfg.tiles_x = tiles_x;
        cfg.tiles_y = tiles_y;
        cfg.clip_limit = clip_limit;
        cfg.validate();
        return from_gray(clahe(to_gray(img), cfg));
      },
      py::arg("image"), py::arg("tiles_x") = 8, py::arg("tiles_y") = 8, py::arg("clip_limit") = 2.0);

  m.def(
      "handcrafted",
      [](const U8Array& img, std::optional<std::vector<std::string>> groups) {
        return to_array(extract_groups(to_gray(img), parse_groups(groups)));
      },
      py::arg("image"), py::arg("groups") = py::none());
  m.def(
      "group_width", [](const std::string& name) { return group_width(parse_group(name)); }, py::arg("group"));
  m.def(
      "glcm",
      [](const U8Array& img, int degrees) {
        const auto g = glcm_matrix(to_gray(img), glcm_direction(degrees));
        py::array_t<std::uint32_t> out({GlcmMatrix::levels, GlcmMatrix::levels});
        std::memcpy(out.mutable_data(), g.counts.data(), g.counts.size() * sizeof(std::uint32_t));
        return out;
      },
      py::arg("image"), py::arg("degrees"));
  m.def(
      "gldm",
      [](const U8Array& img, int degrees) {
        const auto h = gldm_histogram(to_gray(img), gldm_direction(degrees));
        return py::array_t<double>(static_cast<py::ssize_t>(h.size()), h.data());
      },
      py::arg("image"), py::arg("degrees"));
  m.def(
      "lbp_codes",
      [](const U8Array& img, int radius) {
        const GrayImage g = to_gray(img);
        const auto codes = lbp_codes(g, radius);
        return py::array_t<std::uint8_t>(static_cast<py::ssize_t>(codes.size()), codes.data());
      },
      py::arg("image"), py::arg("radius"));

  m.def(
      "kpca_fit",
      [](const RowMatrix& X, int k) {
        const auto fit = kpca_fit(X, k);
        return py::make_tuple(fit.scores, fit.model.eigenvalues);
      },
      py::arg("X"), py::arg("k"), "Linear-kernel KPCA; returns (scores, eigenvalues).");

  m.def("confidence_interval", &confidence_interval, py::arg("metric"), py::arg("n"));
  m.def(
      "confusion_matrix",
      [](std::vector<int> y_true, std::vector<int> y_pred) {
        const auto cm = confusion_matrix(std::span<const int>(y_true), std::span<const int>(y_pred));
        py::array_t<std::int64_t> out({kNumClasses, kNumClasses});
        for (int r = 0; r < kNumClasses; ++r)
          for (int c = 0; c < kNumClasses; ++c) out.mutable_at(r, c) = static_cast<std::int64_t>(cm.counts[r][c]);
        return out;
      },
      py::arg("y_true"), py::arg("y_pred"));
  m.def(
      "report",
      [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& cm, const std::string& name) {
        return py::module_::import("json").attr("loads")(report_json(make_report(name, confusion_from(cm))));
      },
      py::arg("confusion"), py::arg("name") = "model");

  m.def(
      "split",
      [](const std::filesystem::path& source, double train_fraction, std::uint64_t seed, bool stratified) {
        SplitSpec spec{train_fraction, seed, stratified};
        spec.validate();
        const auto parts = split(ingest(source), spec);
        auto ids = [](const LabeledDataset& ds) {
          std::vector<std::string> out;
          for (const auto& s : ds.samples) out.push_back(s.id);
          return out;
        };
        return py::make_tuple(ids(parts.train), ids(parts.test));
      },
      py::arg("source"), py::arg("train_fraction") = 0.8, py::arg("seed") = 42, py::arg("stratified") = true,
      "Ingests a manifest or class-folder directory; returns (train_ids, test_ids).");

  m.def(
      "read_rff",
      [](const std::filesystem::path& path) {
        const RffFile f = read_rff(path);
        RowMatrix values(static_cast<Eigen::Index>(f.rows()), static_cast<Eigen::Index>(f.cols()));
        for (std::size_t r = 0; r < f.rows(); ++r) {
          f.copy_row(r, std::span<double>(values.row(static_cast<Eigen::Index>(r)).data(), f.cols()));
        }
        py::dict header;
        header["ids"] = f.header().ids;
        header["extractor"] = f.header().extractor;
        header["dtype"] = f.header().dtype == RffDtype::f32 ? "f32" : "f64";
        py::list layout;
        for (const auto& g : f.header().group_layout) {
          layout.append(py::dict(py::arg("name") = g.name, py::arg("offset") = g.offset, py::arg("length") = g.length));
        }
        header["group_layout"] = layout;
        return py::make_tuple(header, values);
      },
      py::arg("path"), "Returns (header, values) with values as float64.");
  m.def(
      "write_rff",
      [](const std::filesystem::path& path, std::vector<std::string> ids, const RowMatrix& values,
         const std::string& extractor, const std::string& dtype) {
        if (static_cast<std::size_t>(values.rows()) != ids.size()) throw py::value_error("one id per row required");
        if (dtype != "f32" && dtype != "f64") throw py::value_error("dtype must be 'f32' or 'f64'");
        RffHeader h;
        h.n_samples = ids.size();
        h.n_features = static_cast<std::size_t>(values.cols());
        h.dtype = dtype == "f32" ? RffDtype::f32 : RffDtype::f64;
        h.ids = std::move(ids);
        h.extractor = extractor;
        write_rff(path, h, std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
      },
      py::arg("path"), py::arg("ids"), py::arg("values"), py::arg("extractor") = "", py::arg("dtype") = "f32");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&, std::optional<std::filesystem::path>>(), py::arg("path"),
           py::arg("deep_features") = py::none())
      .def_property_readonly("name", [](const Model& self) { return self.model().name; })
      .def_property_readonly("fused_width", [](const Model& self) { return self.model().fused_width(); })
      .def_property_readonly("groups",
                             [](const Model& self) {
                               std::vector<std::string> out;
                               for (auto g : self.model().groups) out.emplace_back(to_string(g));
                               return out;
                             })
      .def_property_readonly("uses_deep_features", [](const Model& self) { return self.model().deep.has_value(); })
      .def("predict", &Model::predict, py::arg("image"), py::arg("id") = "");

  m.def(
      "load_model",
      [](const std::filesystem::path& path, std::optional<std::filesystem::path> deep_features) {
        return Model(path, std::move(deep_features));
      },
      py::arg("path"), py::arg("deep_features") = py::none());
}
