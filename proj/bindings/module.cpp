#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "thermalnet/dataset.hpp"
#include "thermalnet/kalman.hpp"
#include "thermalnet/metrics.hpp"
#include "thermalnet/model.hpp"
#include "thermalnet/pgm.hpp"
#include "thermalnet/train.hpp"
#include "thermalnet/weights.hpp"

namespace py = pybind11;
using namespace thermalnet;

namespace {

Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array (H, W)");
    Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    const double* src = arr.data();
    for (size_t i = 0; i < img.size(); ++i) {
        double v = src[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        img.pixels[i] = v;
    }
    return img;
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> arr({img.height, img.width});
    std::copy(img.pixels.begin(), img.pixels.end(), arr.mutable_data());
    return arr;
}

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    std::vector<size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<size_t>(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

py::array_t<double> dataset_images(const LabeledDataset& ds) {
    if (ds.items.empty()) return py::array_t<double>();
    const int h = ds.items.front().image.height;
    const int w = ds.items.front().image.width;
    py::array_t<double> arr({static_cast<py::ssize_t>(ds.size()), static_cast<py::ssize_t>(h),
                             static_cast<py::ssize_t>(w)});
    double* dst = arr.mutable_data();
    for (const Sample& s : ds.items) {
        if (s.image.height != h || s.image.width != w) {
            throw std::runtime_error("dataset images differ in size; access them via item()");
        }
        std::copy(s.image.pixels.begin(), s.image.pixels.end(), dst);
        dst += s.image.size();
    }
    return arr;
}

LabeledDataset dataset_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& images,
                                   const std::vector<int>& labels,
                                   const std::vector<std::string>& class_names) {
    if (images.ndim() != 3) throw std::invalid_argument("expected images of shape (N, H, W)");
    if (static_cast<size_t>(images.shape(0)) != labels.size()) {
        throw std::invalid_argument("label count does not match image count");
    }
    LabeledDataset ds;
    ds.class_names = class_names;
    const int h = static_cast<int>(images.shape(1));
    const int w = static_cast<int>(images.shape(2));
    const double* src = images.data();
    for (size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || static_cast<size_t>(labels[n]) >= class_names.size()) {
            throw std::invalid_argument("label out of range");
        }
        Image img(w, h);
        for (size_t i = 0; i < img.size(); ++i) {
            double v = src[n * img.size() + i];
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            img.pixels[i] = v;
        }
        ds.items.push_back({std::move(img), labels[n]});
    }
    return ds;
}

py::dict metrics_to_dict(const MetricsReport& r) {
    py::dict d;
    py::list per_class;
    for (const ClassMetrics& m : r.per_class) {
        py::dict c;
        c["class"] = m.name;
        c["precision"] = m.precision;
        c["recall"] = m.recall;
        c["f1_score"] = m.f1;
        c["support"] = m.support;
        per_class.append(c);
    }
    d["per_class"] = per_class;
    d["precision"] = r.macro_precision;
    d["recall"] = r.macro_recall;
    d["f1_score"] = r.macro_f1;
    d["support"] = r.total_support;
    d["test_accuracy"] = r.accuracy;
    return d;
}

} // namespace

PYBIND11_MODULE(_thermalnet, m) {
    m.doc() = "Kalman image denoising, from-scratch CNN builders and desk-scale training";

    py::class_<KalmanConfig>(m, "KalmanConfig")
        .def(py::init<>())
        .def_readwrite("q", &KalmanConfig::q)
        .def_readwrite("init_p", &KalmanConfig::init_p)
        .def_readwrite("window", &KalmanConfig::window)
        .def_property(
            "r", [](const KalmanConfig& c) { return c.r ? py::cast(*c.r) : py::none().cast<py::object>(); },
            [](KalmanConfig& c, py::object v) {
                if (v.is_none()) {
                    c.r.reset();
                } else {
                    c.r = v.cast<double>();
                }
            },
            "measurement-noise variance; None = estimate from the image");

    m.def("kalman_step",
          [](double x, double p, double z, double q, double r) {
              const KalmanState next = kalman_step({x, p}, z, q, r);
              return py::make_tuple(next.x, next.p);
          },
          py::arg("x"), py::arg("p"), py::arg("z"), py::arg("q"), py::arg("r"),
          "One predict/update cycle; returns (x', p').");

    m.def("denoise_image",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img, const KalmanConfig& cfg) {
              return image_to_array(denoise_image(image_from_array(img), cfg));
          },
          py::arg("image"), py::arg("config") = KalmanConfig());

    m.def("estimate_noise_variance",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
              return estimate_noise_variance(image_from_array(img));
          });

    m.def("psnr",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return psnr(image_from_array(a), image_from_array(b));
          });

    m.def("decode_pgm",
          [](py::bytes data) {
              const std::string s = data;
              return image_to_array(decode_pgm(std::vector<uint8_t>(s.begin(), s.end())));
          });

    m.def("encode_pgm",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img, int maxval) {
              const std::vector<uint8_t> bytes = encode_pgm(image_from_array(img), maxval);
              return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
          },
          py::arg("image"), py::arg("maxval") = 255);

    m.def("resize_bilinear",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img, int out_w, int out_h) {
              return image_to_array(resize_bilinear(image_from_array(img), out_w, out_h));
          });

    m.def("to_input_tensor",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img, int channels) {
              return tensor_to_array(to_input_tensor(image_from_array(img), channels));
          },
          py::arg("image"), py::arg("channels") = 1);

    py::class_<LabeledDataset>(m, "Dataset")
        .def(py::init(&dataset_from_arrays), py::arg("images"), py::arg("labels"), py::arg("class_names"))
        .def_property_readonly("images", &dataset_images)
        .def_property_readonly("labels",
                               [](const LabeledDataset& ds) {
                                   std::vector<int> labels;
                                   for (const Sample& s : ds.items) labels.push_back(s.label);
                                   return labels;
                               })
        .def_readonly("class_names", &LabeledDataset::class_names)
        .def("__len__", &LabeledDataset::size);

    m.def("synth_thermal", &synth_thermal, py::arg("num_classes"), py::arg("per_class"), py::arg("side"),
          py::arg("noise_sd"), py::arg("seed"));
    m.def("load_image_folder", &load_image_folder, py::arg("root"), py::arg("target"),
          py::arg("skip_undecodable") = false);

    py::class_<Model>(m, "Model")
        .def_property_readonly("name", &Model::name)
        .def_property_readonly("input_shape", &Model::input_shape)
        .def_property_readonly("num_outputs", &Model::num_outputs)
        .def("initialize", &Model::initialize, py::arg("seed"))
        .def("initialized", &Model::initialized)
        .def("summary", [](const Model& m_) { return summarize(m_); })
        .def("count_params",
             [](const Model& m_) {
                 const ParamCount pc = count_params(m_);
                 py::dict d;
                 d["trainable"] = pc.trainable;
                 d["non_trainable"] = pc.non_trainable;
                 d["total"] = pc.total;
                 py::list rows;
                 for (const LayerCount& lc : pc.per_layer) {
                     rows.append(py::make_tuple(lc.display, lc.output_shape, lc.params));
                 }
                 d["per_layer"] = rows;
                 return d;
             })
        .def("conv_census",
             [](const Model& m_) {
                 const ConvCensus c = conv_census(m_);
                 return py::make_tuple(c.total, c.trunk);
             })
        .def("forward",
             [](Model& m_, const py::array_t<double, py::array::c_style | py::array::forcecast>& batch,
                bool train, uint64_t seed) {
                 ForwardContext ctx(train ? Mode::kTrain : Mode::kEval, seed);
                 return tensor_to_array(m_.forward(tensor_from_array(batch), ctx));
             },
             py::arg("batch"), py::arg("train") = false, py::arg("seed") = 0)
        .def("save_weights",
             [](Model& m_, const std::string& path, bool base_only) {
                 save_weights(m_, path, base_only ? WeightScope::kBase : WeightScope::kAll);
             },
             py::arg("path"), py::arg("base_only") = false)
        .def("load_weights", [](Model& m_, const std::string& path) {
            const LoadReport report = load_weights(m_, path);
            py::dict d;
            d["loaded"] = report.loaded;
            d["left_at_init"] = report.left_at_init;
            return d;
        });

    m.def("build_vgg19", &build_vgg19, py::arg("input_hw"), py::arg("num_outputs"),
          py::arg("head_width") = 256, py::arg("dropout") = 0.5);
    m.def("build_resnet50", &build_resnet50, py::arg("input_hw"), py::arg("num_outputs"),
          py::arg("head_width") = 256, py::arg("dropout") = 0.5);
    m.def("build_small_cnn", &build_small_cnn, py::arg("input_hw"), py::arg("num_outputs"),
          py::arg("head_width") = 32, py::arg("dropout") = 0.0);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("denoise", &TrainConfig::denoise)
        .def_readwrite("freeze_base", &TrainConfig::freeze_base)
        .def_property(
            "optimizer",
            [](const TrainConfig& c) { return c.optimizer == Optimizer::kSgd ? "sgd" : "adam"; },
            [](TrainConfig& c, const std::string& s) {
                if (s == "sgd") {
                    c.optimizer = Optimizer::kSgd;
                } else if (s == "adam") {
                    c.optimizer = Optimizer::kAdam;
                } else {
                    throw std::invalid_argument("optimizer must be 'sgd' or 'adam'");
                }
            });

    m.def("train",
          [](Model& model, const LabeledDataset& train_set, const LabeledDataset& test_set,
             const TrainConfig& cfg) {
              const TrainHistory h = train(model, train_set, test_set, cfg);
              py::list rows;
              for (const EpochStats& e : h.epochs) {
                  py::dict d;
                  d["train_loss"] = e.train_loss;
                  d["train_acc"] = e.train_accuracy;
                  d["test_loss"] = e.test_loss;
                  d["test_acc"] = e.test_accuracy;
                  rows.append(d);
              }
              return rows;
          },
          py::arg("model"), py::arg("train_set"), py::arg("test_set"), py::arg("config"));

    m.def("evaluate",
          [](Model& model, const LabeledDataset& test_set, const std::vector<std::string>& train_class_names) {
              return metrics_to_dict(evaluate(model, test_set, train_class_names));
          },
          py::arg("model"), py::arg("test_set"), py::arg("train_class_names") = std::vector<std::string>());

    m.attr("__version__") = "0.1.0";
}
