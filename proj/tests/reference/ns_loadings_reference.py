# Copyright 2026 The Spreadcast Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Nelson-Siegel loadings in 50-digit arithmetic, independent of the C++
implementation. Writes ns_loadings_reference.json next to this file."""
import json
import pathlib

import mpmath as mp

mp.mp.dps = 50

LAMBDAS = ["0.0609", "0.02", "0.5"]
TAUS = ["1e-9", "1e-7", "0.25", "1", "3", "6", "12", "16.420361247947454", "24", "60", "120", "360"]


def loadings(tau, lam):
    x = mp.mpf(tau) * mp.mpf(lam)
    l1 = (1 - mp.e ** (-x)) / x
    l2 = l1 - mp.e ** (-x)
    return l1, l2


def main():
    rows = []
    for lam in LAMBDAS:
        for tau in TAUS:
            l1, l2 = loadings(tau, lam)
            rows.append({"tau": float(mp.mpf(tau)), "lambda": float(mp.mpf(lam)),
                         "slope": mp.nstr(l1, 20), "curvature": mp.nstr(l2, 20)})
    out = pathlib.Path(__file__).with_name("ns_loadings_reference.json")
    out.write_text(json.dumps({"digits": 50, "rows": rows}, indent=1) + "\n")


if __name__ == "__main__":
    main()
