"""Reference values for the replication tables, used by the verdict column.

Theta tables map parameter -> (bias, sd, rmse) for each column group; CDF tables
map curve -> (ibias2, imse) per group. Group order follows ``TABLES[t]["groups"]``.
"""

TABLES = {
    1: {"kind": "theta", "groups": ("functional_contraction", "heckman"), "n": (1000,),
        "variant": "base"},
    2: {"kind": "cdf", "groups": ("functional_contraction", "heckman"), "n": (1000,),
        "variant": "base"},
    3: {"kind": "theta", "groups": ("functional_contraction", "heckman"), "n": (5000,),
        "variant": "base"},
    4: {"kind": "cdf", "groups": ("functional_contraction", "heckman"), "n": (5000,),
        "variant": "base"},
    5: {"kind": "theta", "groups": ("n=1000", "n=5000"), "n": (1000, 5000),
        "variant": "no_excluded"},
    6: {"kind": "cdf", "groups": ("n=1000", "n=5000"), "n": (1000, 5000),
        "variant": "no_excluded"},
    7: {"kind": "theta", "groups": ("n=1000", "n=5000"), "n": (1000, 5000),
        "variant": "logistic"},
    8: {"kind": "cdf", "groups": ("n=1000", "n=5000"), "n": (1000, 5000),
        "variant": "logistic"},
}

REFERENCE_REPS = 500

# table -> dgp -> row -> values, groups concatenated left to right
REFERENCE = {
    1: {1: {'beta': (-0.001, 0.0906, 0.0905, 0.0016, 0.0929, 0.0929),
             'gamma': (-0.0075, 0.1958, 0.1957, 0.0027, 0.2126, 0.2124),
             'xi2': (0.0021, 0.0721, 0.0721, 0.0003, 0.098, 0.0979)},
         2: {'beta': (-0.0049, 0.0945, 0.0946, 0.0036, 0.096, 0.096),
             'gamma': (-0.0087, 0.199, 0.199, 0.0196, 0.2451, 0.2457),
             'xi2': (0.0021, 0.0728, 0.0728, 0.0183, 0.1203, 0.1215)},
         3: {'beta': (-0.0045, 0.093, 0.093, -0.0023, 0.0947, 0.0946),
             'gamma': (-0.0254, 0.1603, 0.1621, 0.1704, 0.2398, 0.294),
             'xi2': (-0.0006, 0.0702, 0.0701, 0.0097, 0.086, 0.0864)},
         4: {'beta': (-0.0045, 0.0933, 0.0933, -0.004, 0.0941, 0.0941),
             'gamma': (-0.0131, 0.3485, 0.3484, 0.0368, 0.3826, 0.384),
             'xi2': (-0.0016, 0.0677, 0.0676, -0.0044, 0.0731, 0.0731)},
         5: {'beta': (-0.005, 0.0886, 0.0886, -0.005, 0.0885, 0.0886),
             'gamma': (0.0551, 0.965, 0.9656, 0.1873, 0.783, 0.8044),
             'xi2': (-0.0023, 0.0671, 0.0671, 0.0047, 0.0675, 0.0676)}},
     2: {1: {'F1(.|x2=0)': (0.0003, 0.0029, 0.0006, 0.0211),
             'F1(.|x2=1)': (0.0004, 0.0032, 0.0003, 0.0125),
             'F2(.|x2=0)': (0.0001, 0.0006, 0.0, 0.0016),
             'F2(.|x2=1)': (0.0002, 0.0013, 0.0001, 0.0042)},
         2: {'F1(.|x2=0)': (0.0006, 0.0032, 0.0042, 0.0269),
             'F1(.|x2=1)': (0.0008, 0.0037, 0.0035, 0.0177),
             'F2(.|x2=0)': (0.0002, 0.0006, 0.0021, 0.004),
             'F2(.|x2=1)': (0.0003, 0.0014, 0.0022, 0.007)},
         3: {'F1(.|x2=0)': (0.006, 0.0086, 0.0247, 0.0501),
             'F1(.|x2=1)': (0.0007, 0.0033, 0.0022, 0.0119),
             'F2(.|x2=0)': (0.0028, 0.0032, 0.0499, 0.0525),
             'F2(.|x2=1)': (0.0002, 0.0013, 0.0129, 0.017)},
         4: {'F1(.|x2=0)': (0.0007, 0.0033, 0.0049, 0.0304),
             'F1(.|x2=1)': (0.0005, 0.0046, 0.0005, 0.0161),
             'F2(.|x2=0)': (0.0008, 0.0012, 0.0281, 0.0303),
             'F2(.|x2=1)': (0.0002, 0.0011, 0.0087, 0.0112)},
         5: {'F1(.|x2=0)': (0.0014, 0.0034, 0.0026, 0.0226),
             'F1(.|x2=1)': (0.0008, 0.0058, 0.0008, 0.0192),
             'F2(.|x2=0)': (0.0014, 0.0018, 0.0211, 0.0234),
             'F2(.|x2=1)': (0.0002, 0.0011, 0.0071, 0.0086)}},
     3: {1: {'beta': (-0.0007, 0.0412, 0.0411, 0.0003, 0.0417, 0.0416),
             'gamma': (-0.0022, 0.0864, 0.0864, 0.0017, 0.0917, 0.0916),
             'xi2': (0.0028, 0.0345, 0.0345, 0.0045, 0.0427, 0.0429)},
         2: {'beta': (-0.0009, 0.0427, 0.0427, 0.0052, 0.0434, 0.0436),
             'gamma': (0.0011, 0.0858, 0.0857, 0.0157, 0.0982, 0.0994),
             'xi2': (0.0001, 0.0344, 0.0344, 0.0051, 0.051, 0.0512)},
         3: {'beta': (-0.0012, 0.0414, 0.0414, -0.0002, 0.0417, 0.0417),
             'gamma': (-0.0133, 0.0707, 0.0719, 0.1611, 0.0984, 0.1887),
             'xi2': (0.0019, 0.0317, 0.0317, 0.0137, 0.0363, 0.0388)},
         4: {'beta': (-0.0003, 0.0404, 0.0404, -0.0002, 0.0406, 0.0405),
             'gamma': (0.0026, 0.1544, 0.1543, 0.0433, 0.1666, 0.172),
             'xi2': (0.0009, 0.0306, 0.0306, -0.0001, 0.0314, 0.0314)},
         5: {'beta': (0.0002, 0.0399, 0.0398, 0.0003, 0.0398, 0.0398),
             'gamma': (-0.0054, 0.4395, 0.4391, -0.0043, 0.4274, 0.427),
             'xi2': (0.0009, 0.0304, 0.0304, 0.001, 0.0305, 0.0305)}},
     4: {1: {'F1(.|x2=0)': (0.0002, 0.0007, 0.0, 0.004),
             'F1(.|x2=1)': (0.0002, 0.0009, 0.0, 0.0024),
             'F2(.|x2=0)': (0.0001, 0.0002, 0.0, 0.0003),
             'F2(.|x2=1)': (0.0001, 0.0003, 0.0, 0.0008)},
         2: {'F1(.|x2=0)': (0.0003, 0.0009, 0.0024, 0.0078),
             'F1(.|x2=1)': (0.0004, 0.001, 0.0024, 0.0056),
             'F2(.|x2=0)': (0.0001, 0.0002, 0.002, 0.0023),
             'F2(.|x2=1)': (0.0001, 0.0003, 0.002, 0.0029)},
         3: {'F1(.|x2=0)': (0.0059, 0.0064, 0.0209, 0.0269),
             'F1(.|x2=1)': (0.0005, 0.0011, 0.0037, 0.0057),
             'F2(.|x2=0)': (0.0028, 0.0029, 0.0493, 0.0499),
             'F2(.|x2=1)': (0.0001, 0.0003, 0.0143, 0.0152)},
         4: {'F1(.|x2=0)': (0.0006, 0.0011, 0.0024, 0.0077),
             'F1(.|x2=1)': (0.0003, 0.0012, 0.0016, 0.0047),
             'F2(.|x2=0)': (0.0007, 0.0008, 0.0272, 0.0277),
             'F2(.|x2=1)': (0.0001, 0.0003, 0.0098, 0.0104)},
         5: {'F1(.|x2=0)': (0.0014, 0.0018, 0.0011, 0.0053),
             'F1(.|x2=1)': (0.0007, 0.0018, 0.0016, 0.0055),
             'F2(.|x2=0)': (0.0014, 0.0015, 0.0202, 0.0206),
             'F2(.|x2=1)': (0.0001, 0.0003, 0.0081, 0.0084)}},
     5: {1: {'gamma': (-0.0011, 0.2082, 0.208, 0.0018, 0.0866, 0.0865),
             'xi2': (0.0074, 0.057, 0.0574, 0.0, 0.0254, 0.0253)},
         2: {'gamma': (-0.0018, 0.2066, 0.2064, 0.0024, 0.1, 0.0999),
             'xi2': (0.0033, 0.0535, 0.0535, 0.0028, 0.0264, 0.0265)},
         3: {'gamma': (-0.0163, 0.1581, 0.1587, -0.0043, 0.0728, 0.0729),
             'xi2': (0.0061, 0.0542, 0.0544, 0.0007, 0.0238, 0.0238)},
         4: {'gamma': (0.0019, 0.366, 0.3656, 0.0059, 0.1563, 0.1563),
             'xi2': (0.005, 0.0498, 0.05, -0.0005, 0.0225, 0.0225)},
         5: {'gamma': (0.0, 1.0797, 1.0786, -0.0146, 0.4409, 0.4407),
             'xi2': (0.0014, 0.0531, 0.053, -0.0007, 0.0233, 0.0233)}},
     6: {1: {'F1(.|x2=0)': (0.0002, 0.0018, 0.0002, 0.0004),
             'F1(.|x2=1)': (0.0003, 0.0019, 0.0002, 0.0005),
             'F2(.|x2=0)': (0.0001, 0.0003, 0.0, 0.0001),
             'F2(.|x2=1)': (0.0001, 0.0007, 0.0001, 0.0002)},
         2: {'F1(.|x2=0)': (0.0004, 0.0017, 0.0003, 0.0006),
             'F1(.|x2=1)': (0.0005, 0.0018, 0.0003, 0.0006),
             'F2(.|x2=0)': (0.0002, 0.0004, 0.0001, 0.0001),
             'F2(.|x2=1)': (0.0002, 0.0007, 0.0001, 0.0002)},
         3: {'F1(.|x2=0)': (0.0058, 0.0073, 0.0061, 0.0064),
             'F1(.|x2=1)': (0.0006, 0.0021, 0.0005, 0.0008),
             'F2(.|x2=0)': (0.0029, 0.0031, 0.0028, 0.0028),
             'F2(.|x2=1)': (0.0001, 0.0007, 0.0, 0.0002)},
         4: {'F1(.|x2=0)': (0.0006, 0.0021, 0.0006, 0.0008),
             'F1(.|x2=1)': (0.0004, 0.0024, 0.0003, 0.0007),
             'F2(.|x2=0)': (0.0008, 0.001, 0.0007, 0.0007),
             'F2(.|x2=1)': (0.0001, 0.0006, 0.0, 0.0002)},
         5: {'F1(.|x2=0)': (0.0014, 0.0025, 0.0013, 0.0016),
             'F1(.|x2=1)': (0.0007, 0.0033, 0.0006, 0.0012),
             'F2(.|x2=0)': (0.0013, 0.0015, 0.0014, 0.0014),
             'F2(.|x2=1)': (0.0002, 0.0006, 0.0001, 0.0002)}},
     7: {1: {'beta': (-0.0309, 0.0856, 0.0909, -0.0306, 0.0392, 0.0497),
             'gamma': (-0.0793, 0.1826, 0.1989, -0.0743, 0.0806, 0.1096),
             'xi2': (-0.0754, 0.0714, 0.1038, -0.0752, 0.0342, 0.0826)},
         2: {'beta': (-0.0315, 0.0902, 0.0954, -0.0282, 0.0407, 0.0495),
             'gamma': (-0.0748, 0.1864, 0.2007, -0.0667, 0.0806, 0.1045),
             'xi2': (-0.0714, 0.0727, 0.1018, -0.0742, 0.034, 0.0816)},
         3: {'beta': (-0.0323, 0.0887, 0.0943, -0.0293, 0.0398, 0.0494),
             'gamma': (-0.1051, 0.1475, 0.181, -0.094, 0.065, 0.1142),
             'xi2': (-0.0789, 0.0698, 0.1053, -0.0768, 0.0317, 0.083)},
         4: {'beta': (-0.0263, 0.09, 0.0937, -0.0222, 0.0392, 0.045),
             'gamma': (-0.0746, 0.3249, 0.333, -0.0584, 0.1442, 0.1554),
             'xi2': (-0.0776, 0.0679, 0.103, -0.0755, 0.0307, 0.0814)},
         5: {'beta': (-0.0315, 0.0847, 0.0902, -0.0266, 0.0381, 0.0465),
             'gamma': (0.0029, 0.9169, 0.916, -0.0606, 0.4177, 0.4217),
             'xi2': (-0.0827, 0.0667, 0.1063, -0.0801, 0.0302, 0.0856)}},
     8: {1: {'F1(.|x2=0)': (0.0004, 0.0029, 0.0002, 0.0007),
             'F1(.|x2=1)': (0.0004, 0.0032, 0.0002, 0.0009),
             'F2(.|x2=0)': (0.0001, 0.0006, 0.0001, 0.0002),
             'F2(.|x2=1)': (0.0002, 0.0013, 0.0001, 0.0003)},
         2: {'F1(.|x2=0)': (0.0006, 0.0033, 0.0005, 0.001),
             'F1(.|x2=1)': (0.0007, 0.0037, 0.0004, 0.001),
             'F2(.|x2=0)': (0.0002, 0.0006, 0.0001, 0.0002),
             'F2(.|x2=1)': (0.0003, 0.0015, 0.0001, 0.0004)},
         3: {'F1(.|x2=0)': (0.0062, 0.0087, 0.0061, 0.0066),
             'F1(.|x2=1)': (0.0007, 0.0033, 0.0005, 0.0011),
             'F2(.|x2=0)': (0.0028, 0.0032, 0.0028, 0.0029),
             'F2(.|x2=1)': (0.0002, 0.0013, 0.0001, 0.0003)},
         4: {'F1(.|x2=0)': (0.0008, 0.0034, 0.0006, 0.0012),
             'F1(.|x2=1)': (0.0006, 0.0046, 0.0003, 0.0012),
             'F2(.|x2=0)': (0.0008, 0.0012, 0.0007, 0.0008),
             'F2(.|x2=1)': (0.0002, 0.0011, 0.0001, 0.0003)},
         5: {'F1(.|x2=0)': (0.0014, 0.0034, 0.0014, 0.0019),
             'F1(.|x2=1)': (0.0008, 0.0058, 0.0007, 0.0018),
             'F2(.|x2=0)': (0.0014, 0.0018, 0.0014, 0.0015),
             'F2(.|x2=1)': (0.0002, 0.0011, 0.0001, 0.0003)}}}
