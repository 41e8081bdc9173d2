"""
Setup file.
"""

from setuptools import setup

KEYWORDS = "inertial odometry imu domain adaptation gan python"


if __name__ == "__main__":
    setup(
        keywords=KEYWORDS,
        package_data={"": ["assets/benchmark.conf"]},
        include_package_data=True)
