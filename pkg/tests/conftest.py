from pathlib import Path

import pytest

from ramtwin.table import ColumnTable

DATA_DIR = Path(__file__).parent / "data"

LGC_LISTING = '''
#
# This model specification was automatically generated by Onyx
#
# require("OpenMx");
# modelData <- read.table(DATAFILENAME, header = TRUE)
# manifests<-c("x1", "x2", "x3")
# latents<-c("icept", "slope", "a1", "e1", "a2", "e2")
# model <- mxModel("umx2",
# type="RAM",
# manifestVars = manifests,
# latentVars = latents,
lgc_paths <-c(
  mxPath(from="icept", to=c("x1", "x2", "x3"), free=c(FALSE, FALSE, FALSE),
  value=c(1.0, 1.0, 1.0) , arrows=1, label=c("icept__x1", "icept__x2", "icept__x3") ),
  mxPath(from="slope", to=c("x2", "x3"), free=c(FALSE, FALSE), value=c(1.0, 2.0) , arrows=1,
  label=c("slope__x2", "slope__x3") ),
  mxPath(from="one", to=c("icept", "slope"), free=c(TRUE, TRUE), value=c(1.0, 1.0) ,
  arrows=1, label=c("const__icept", "const__slope") ),
  mxPath(from="a1", to=c("icept", "slope"), free=c(TRUE, TRUE), value=c(1.0, 1.0) ,
  arrows=1, label=c("a1__icept", "a1__slope") ),
  mxPath(from="e1", to=c("icept", "slope"), free=c(FALSE, TRUE), value=c(1.0, 1.0) ,
  arrows=1, label=c("e1__icept", "e1__slope") ),
  mxPath(from="a2", to=c("slope"), free=c(TRUE), value=c(1.0) , arrows=1,
  label=c("a2__slope") ),
  mxPath(from="e2", to=c("slope"), free=c(TRUE), value=c(1.0) , arrows=1,
  label=c("e2__slope") ),
  mxPath(from="x1", to=c("x1"), free=c(TRUE), value=c(1.0) , arrows=2, label=c("e") ),
  mxPath(from="x2", to=c("x2"), free=c(TRUE), value=c(1.0) , arrows=2, label=c("e") ),
  mxPath(from="x3", to=c("x3"), free=c(TRUE), value=c(1.0) , arrows=2, label=c("e") ),
mxPath(from="a1",to=c("a1"), free=c(FALSE), value=c(1.0) , arrows=2, label=c("VAR_a1")
),
mxPath(from="e1",to=c("e1"), free=c(FALSE), value=c(1.0) , arrows=2, label=c("VAR_e1")
),
mxPath(from="a2",to=c("a2"), free=c(FALSE), value=c(1.0) , arrows=2, label=c("VAR_a2")
),
mxPath(from="e2",to=c("e2"), free=c(FALSE), value=c(1.0) , arrows=2, label=c("VAR_e2")
),
mxPath(from="one",to=c("x1","x2","x3"), free=F, value=0, arrows=1)#,
#mxData(modelData, type = "raw")
);
lgc_model <- umxTwinMaker(
  "lgc",
  paths = lgc_paths,
  mzData = mzData,
  dzData = dzData
)
'''


@pytest.fixture(scope="session")
def lgc_listing() -> str:
    return LGC_LISTING


@pytest.fixture(scope="session")
def motor_table() -> ColumnTable:
    return ColumnTable.from_csv(DATA_DIR / "motor.csv")
