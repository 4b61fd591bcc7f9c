import os
import sys

# ctest points SIDLAB_TEST_PATH at the in-tree build; an editable install would
# otherwise win through its import hook
_path = os.environ.get("SIDLAB_TEST_PATH")
if _path:
    sys.meta_path[:] = [f for f in sys.meta_path if "ScikitBuildRedirectingFinder" not in type(f).__name__]
    sys.path.insert(0, _path)
