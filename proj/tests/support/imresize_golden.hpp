#pragma once
#include <vector>

namespace vsrpp::golden {

// Frozen output of tests/support/gen_imresize_golden.py.
inline const std::vector<double> kShrink16to4 = {
    0.279296875, 0.263671875, 0.22900390625, 0.16357421875, 0.08642578125, 0.02099609375, -0.011962890625,
    -0.018310546875, -0.010986328125, -0.001708984375, 0, 0, 0, 0, 0, 0, -0.029296875, -0.013671875,
    0.022705078125, 0.097412109375, 0.181884765625, 0.240966796875, 0.240966796875, 0.181884765625, 0.097412109375,
    0.022705078125, -0.011962890625, -0.018310546875, -0.010986328125, -0.001708984375, 0, 0, 0, 0,
    -0.001708984375, -0.010986328125, -0.018310546875, -0.011962890625, 0.022705078125, 0.097412109375,
    0.181884765625, 0.240966796875, 0.240966796875, 0.181884765625, 0.097412109375, 0.022705078125, -0.013671875,
    -0.029296875, 0, 0, 0, 0, 0, 0, -0.001708984375, -0.010986328125, -0.018310546875, -0.011962890625,
    0.02099609375, 0.08642578125, 0.16357421875, 0.22900390625, 0.263671875, 0.279296875
};
inline const std::vector<double> kShrink10to4 = {
    0.44200000000000017, 0.37440000000000012, 0.20000000000000009, 0.025599999999999505, -0.029399999999999885,
    -0.012599999999999773, 0, 0, 0, 0, -0.041999999999999649, 0.027399999999999921, 0.22500000000000006,
    0.39060000000000017, 0.32620000000000005, 0.11579999999999999, -0.016200000000000086, -0.025000000000000008,
    -0.0018000000000004241, 0, 0, -0.0018000000000004245, -0.025000000000000012, -0.016200000000000089,
    0.11580000000000001, 0.32620000000000016, 0.39060000000000022, 0.22500000000000012, 0.027399999999999928,
    -0.041999999999999656, 0, 0, 0, 0, -0.012599999999999771, -0.029399999999999878, 0.025599999999999498,
    0.20000000000000007, 0.37440000000000007, 0.44200000000000006
};
inline const std::vector<double> kGrow5to20 = {
    0.029687500000000006, 0.067187500000000011, 0.15312500000000001, 0.32499999999999996, 0.52187499999999998,
    0.66874999999999996, 0.69101562500000002, 0.57929687500000004, 0.42070312499999996, 0.30898437499999998,
    0.33603515625000002, 0.50888671875000002, 0.72626953125000004, 0.88037109375000011, 0.86992187500000007,
    0.70195312499999996, 0.46835937500000002, 0.26289062500000004, 0.16171875000000002, 0.11796875000000001
};
inline const std::vector<double> kImage12x20to3x5 = {
    0.80773008611910424, 0.76135092156596629, 0.21518923192937781, 0.22343656813980514, 0.71673484889419636,
    0.53498320980979364, 0.39109122441897337, 0.46008795207753239, 0.61921109425762089, 0.54264626109240599,
    0.44370701746531743, 0.48330734996289565, 0.53732031009883474, 0.50232420249950116, 0.48213040556887876
};

}  // namespace vsrpp::golden
