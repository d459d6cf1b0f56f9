#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include "berrygan/config.hpp"
#include "berrygan/counting.hpp"
#include "berrygan/gan.hpp"
#include "berrygan/helmert.hpp"
#include "berrygan/image.hpp"
#include "berrygan/leaf.hpp"
#include "berrygan/metrics.hpp"
#include "berrygan/pipeline.hpp"
#include "berrygan/scene.hpp"

namespace py = pybind11;
using namespace berrygan;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename GridT>
py::array_t<std::uint8_t> grid_to_array(const GridT& g) {
    py::array_t<std::uint8_t> out({g.height, g.width});
    std::memcpy(out.mutable_data(), g.pixels.data(), g.pixels.size());
    return out;
}

template <typename GridT>
GridT array_to_grid(const U8Array& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D uint8 array");
    GridT g(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    std::memcpy(g.pixels.data(), arr.data(), g.pixels.size());
    return g;
}

py::array_t<bool> footprint_to_array(const Footprint& fp) {
    py::array_t<bool> out({fp.height, fp.width});
    auto* data = out.mutable_data();
    for (int y = 0; y < fp.height; ++y)
        for (int x = 0; x < fp.width; ++x) data[y * fp.width + x] = fp.at(x, y);
    return out;
}

Footprint array_to_footprint(const py::array_t<bool, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D bool array");
    Footprint fp(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
    const bool* data = arr.data();
    for (int y = 0; y < fp.height; ++y)
        for (int x = 0; x < fp.width; ++x)
            if (data[y * fp.width + x]) fp.set(x, y, true);
    return fp;
}

Config config_from_dict(const py::dict& d) {
    Config c;
    for (auto item : d) {
        std::string key = py::str(item.first);
        std::string value;
        if (py::isinstance<py::bool_>(item.second)) {
            value = item.second.cast<bool>() ? "true" : "false";
        } else {
            value = py::str(item.second);
        }
        c.set(key, value);
    }
    return c;
}

FilterConfig filters_from_dict(const py::object& obj) {
    FilterConfig f;
    if (obj.is_none()) return f;
    py::dict d = obj.cast<py::dict>();
    for (auto item : d) {
        std::string key = py::str(item.first);
        if (key == "min_area") f.min_area = item.second.cast<int>();
        else if (key == "min_area_enabled") f.min_area_enabled = item.second.cast<bool>();
        else if (key == "min_axis_ratio") f.min_axis_ratio = item.second.cast<double>();
        else if (key == "axis_ratio_enabled") f.axis_ratio_enabled = item.second.cast<bool>();
        else if (key == "min_area_ratio") f.min_area_ratio = item.second.cast<double>();
        else if (key == "area_ratio_enabled") f.area_ratio_enabled = item.second.cast<bool>();
        else if (key == "min_edge_coverage") f.min_edge_coverage = item.second.cast<double>();
        else if (key == "edge_coverage_enabled") f.edge_coverage_enabled = item.second.cast<bool>();
        else throw std::invalid_argument("unknown filter key '" + key + "'");
    }
    return f;
}

py::dict pair_to_dict(const PatchPair& pair) {
    py::dict d;
    d["occluded_image"] = grid_to_array(pair.occluded_image);
    d["occluded_mask"] = grid_to_array(pair.occluded_mask);
    d["nonoccluded_image"] = grid_to_array(pair.nonoccluded_image);
    d["nonoccluded_mask"] = grid_to_array(pair.nonoccluded_mask);
    d["footprint"] = footprint_to_array(pair.leaf_footprint);
    py::dict prov;
    prov["scene_seed"] = pair.provenance.scene_seed;
    prov["leaf_id"] = pair.provenance.leaf_id;
    prov["angle"] = pair.provenance.angle;
    prov["offset_x"] = pair.provenance.offset_x;
    prov["offset_y"] = pair.provenance.offset_y;
    d["provenance"] = prov;
    return d;
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("split must be 'train' or 'test'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "berry revelation core: scene synthesis, occlusion, GAN, counting";

    m.attr("BACKGROUND") = static_cast<int>(kBackground);
    m.attr("BERRY_EDGE") = static_cast<int>(kBerryEdge);
    m.attr("BERRY") = static_cast<int>(kBerry);

    m.def("quantize_value", [](int v) {
        if (v < 0 || v > 255) throw std::invalid_argument("value outside [0,255]");
        return static_cast<int>(quantize_value(static_cast<std::uint8_t>(v)));
    }, py::arg("value"));

    m.def("quantize_mask", [](const U8Array& raw) {
        return grid_to_array(quantize_mask(array_to_grid<RawMask>(raw)));
    }, py::arg("raw"));

    m.def("default_config", [] {
        Config cfg = PipelineSettings::desk_defaults().to_config();
        py::dict d;
        for (const auto& [k, v] : cfg.entries()) d[py::str(k)] = v;
        return d;
    });

    m.def("generate_scene", [](const py::dict& config, std::uint64_t seed) {
        PipelineSettings s = PipelineSettings::from_config(config_from_dict(config));
        ScenePatch scene = generate_scene(s.scene, seed);
        return py::make_tuple(grid_to_array(scene.image), grid_to_array(scene.mask),
                              scene.berry_count);
    }, py::arg("config") = py::dict(), py::arg("seed") = 1);

    m.def("make_leaf_bank", [](int count, int train_count, int patch_size, std::uint64_t seed) {
        py::list out;
        for (const LeafTemplate& leaf : make_leaf_bank(count, train_count, patch_size, seed)) {
            py::dict d;
            d["id"] = leaf.id;
            d["split"] = leaf.split == Split::Train ? "train" : "test";
            d["footprint"] = footprint_to_array(leaf.footprint);
            d["texture"] = grid_to_array(leaf.texture);
            out.append(d);
        }
        return out;
    }, py::arg("count") = 24, py::arg("train_count") = 18, py::arg("patch_size") = 72,
       py::arg("seed") = 1);

    m.def("reocclude", [](const U8Array& mask, const py::array_t<bool, py::array::c_style | py::array::forcecast>& footprint) {
        return grid_to_array(reocclude(array_to_grid<BerryMask>(mask),
                                       array_to_footprint(footprint)));
    }, py::arg("mask"), py::arg("footprint"));

    m.def("build_pairs", [](const py::dict& config, const std::string& split, int scene_count,
                            int multiplicity, int target_pairs) {
        PipelineSettings s = PipelineSettings::from_config(config_from_dict(config));
        py::list out;
        for (const PatchPair& pair :
             build_pairs(s, split_from_name(split), scene_count, multiplicity, target_pairs))
            out.append(pair_to_dict(pair));
        return out;
    }, py::arg("config") = py::dict(), py::arg("split") = "train", py::arg("scene_count") = 0,
       py::arg("multiplicity") = 1, py::arg("target_pairs") = 0);

    m.def("estimate_helmert", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
                                 const py::array_t<double, py::array::c_style | py::array::forcecast>& dst) {
        if (src.ndim() != 2 || src.shape(1) != 2 || dst.ndim() != 2 || dst.shape(1) != 2 ||
            src.shape(0) != dst.shape(0))
            throw std::invalid_argument("expected matching Nx2 arrays");
        std::vector<KeypointPair> kps;
        for (py::ssize_t i = 0; i < src.shape(0); ++i)
            kps.push_back({src.at(i, 0), src.at(i, 1), dst.at(i, 0), dst.at(i, 1)});
        HelmertFit fit = estimate_helmert(kps);
        py::dict d;
        d["tx"] = fit.params.tx;
        d["ty"] = fit.params.ty;
        d["scale"] = fit.params.s;
        d["theta"] = fit.params.theta;
        d["rms_x"] = fit.rms_x;
        d["rms_y"] = fit.rms_y;
        return d;
    }, py::arg("source"), py::arg("target"));

    m.def("apply_helmert", [](const py::dict& params, const U8Array& grid, bool is_mask) {
        HelmertParams p;
        p.tx = params["tx"].cast<double>();
        p.ty = params["ty"].cast<double>();
        p.s = params["scale"].cast<double>();
        p.theta = params["theta"].cast<double>();
        if (is_mask) return grid_to_array(apply_helmert(p, array_to_grid<BerryMask>(grid)));
        return grid_to_array(apply_helmert(p, array_to_grid<GrayscaleImage>(grid)));
    }, py::arg("params"), py::arg("grid"), py::arg("is_mask") = false);

    m.def("extract_patches", [](const U8Array& image, const U8Array& mask, int window, int stride) {
        py::list out;
        for (const ExtractedPatch& p :
             extract_patches(array_to_grid<GrayscaleImage>(image), array_to_grid<BerryMask>(mask),
                             window, stride)) {
            py::dict d;
            d["image"] = grid_to_array(p.image);
            d["mask"] = grid_to_array(p.mask);
            d["origin_x"] = p.origin_x;
            d["origin_y"] = p.origin_y;
            out.append(d);
        }
        return out;
    }, py::arg("image"), py::arg("mask"), py::arg("window") = 656, py::arg("stride") = 162);

    m.def("resize_nearest", [](const U8Array& grid, int target, bool is_mask) {
        if (is_mask) return grid_to_array(resize_nearest(array_to_grid<BerryMask>(grid), target));
        return grid_to_array(resize_nearest(array_to_grid<GrayscaleImage>(grid), target));
    }, py::arg("grid"), py::arg("target"), py::arg("is_mask") = false);

    m.def("count_berries", [](const U8Array& mask, const py::object& filters) {
        CountReport rep = count_berries(array_to_grid<BerryMask>(mask), filters_from_dict(filters));
        py::dict d;
        d["raw_components"] = rep.raw_component_count;
        d["accepted"] = rep.accepted_count;
        d["rejected_min_area"] = rep.rejected_min_area;
        d["rejected_axis_ratio"] = rep.rejected_axis_ratio;
        d["rejected_area_vs_expected"] = rep.rejected_area_vs_expected;
        d["rejected_edge_coverage"] = rep.rejected_edge_coverage;
        return d;
    }, py::arg("mask"), py::arg("filters") = py::none());

    m.def("berry_stats", [](const U8Array& mask, const py::object& filters) {
        py::list out;
        for (const BerryStat& st :
             berry_stats(array_to_grid<BerryMask>(mask), filters_from_dict(filters)))
            out.append(py::make_tuple(st.area, st.diameter));
        return out;
    }, py::arg("mask"), py::arg("filters") = py::none());

    m.def("iou", [](const U8Array& ref, const U8Array& gen, int class_value) {
        if (!is_mask_value(static_cast<std::uint8_t>(class_value)))
            throw std::invalid_argument("class_value must be 0, 127 or 255");
        MaskClass c = class_value == 0   ? MaskClass::Background
                      : class_value == 127 ? MaskClass::BerryEdge
                                           : MaskClass::Berry;
        return iou(array_to_grid<BerryMask>(ref), array_to_grid<BerryMask>(gen), c);
    }, py::arg("reference"), py::arg("generated"), py::arg("class_value") = 255);

    m.def("pearson", [](const U8Array& a, const U8Array& b) -> py::object {
        auto r = pearson_correlation(array_to_grid<RawMask>(a), array_to_grid<RawMask>(b));
        if (!r) return py::none();
        return py::float_(*r);
    }, py::arg("a"), py::arg("b"));

    m.def("r_squared", [](const std::vector<double>& predicted, const std::vector<double>& reference) {
        RSquared r = r_squared(predicted, reference);
        return py::make_tuple(r.r2, r.slope, r.intercept);
    }, py::arg("predicted"), py::arg("reference"));

    m.def("generation_map", [](const U8Array& ref, const U8Array& gen, const std::string& mode) {
        GenerationMapMode m_ = mode == "three_class" ? GenerationMapMode::ThreeClass
                               : mode == "two_class" ? GenerationMapMode::TwoClass
                                                     : throw std::invalid_argument(
                                                           "mode must be three_class or two_class");
        GenerationMap map =
            generation_map(array_to_grid<BerryMask>(ref), array_to_grid<BerryMask>(gen), m_);
        std::vector<std::uint8_t> rgb = render_generation_map(map);
        py::array_t<std::uint8_t> out({map.height, map.width, 3});
        std::memcpy(out.mutable_data(), rgb.data(), rgb.size());
        return out;
    }, py::arg("reference"), py::arg("generated"), py::arg("mode") = "three_class");

    m.def("run_recipe", [](const std::string& name, const std::string& workdir,
                           const py::dict& config) {
        RecipeResult res = run_recipe(name, workdir, config_from_dict(config));
        py::dict d;
        d["name"] = res.name;
        d["workdir"] = res.workdir;
        py::dict stats;
        for (const auto& [k, v] : res.stats) stats[py::str(k)] = v;
        d["stats"] = stats;
        return d;
    }, py::arg("name"), py::arg("workdir"), py::arg("config") = py::dict());
}
