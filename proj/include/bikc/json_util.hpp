#pragma once

#include <json.hpp>

#include "bikc/data.hpp"

namespace bikc {

inline nlohmann::ordered_json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline Eigen::VectorXd vec_from_json(const nlohmann::ordered_json& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v[i++] = x.get<double>();
    return v;
}

inline nlohmann::ordered_json norm_to_json(const data::NormStats& st) {
    nlohmann::ordered_json j;
    j["obs_min"] = vec_to_json(st.obs_min);
    j["obs_max"] = vec_to_json(st.obs_max);
    j["act_min"] = vec_to_json(st.act_min);
    j["act_max"] = vec_to_json(st.act_max);
    j["kp_min"] = vec_to_json(st.kp_min);
    j["kp_max"] = vec_to_json(st.kp_max);
    return j;
}

inline data::NormStats norm_from_json(const nlohmann::ordered_json& j) {
    data::NormStats st;
    st.obs_min = vec_from_json(j.at("obs_min"));
    st.obs_max = vec_from_json(j.at("obs_max"));
    st.act_min = vec_from_json(j.at("act_min"));
    st.act_max = vec_from_json(j.at("act_max"));
    st.kp_min = vec_from_json(j.at("kp_min"));
    st.kp_max = vec_from_json(j.at("kp_max"));
    st.fitted = true;
    return st;
}

}  // namespace bikc
