from setuptools import setup, find_packages

setup(
    name="bbm-extremes",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    include_package_data=True,
    install_requires=[
        "setuptools>=42.0.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "matplotlib>=3.6.0",
        "click>=8.0.0",
        "pyyaml>=6.0",
        "python-slugify>=8.0.0",
    ],
    entry_points={
        "console_scripts": [
            "bbm-extremes=bbm_extremes.__main__:main",
        ],
    },
    description="Simulate d-dimensional branching Brownian motion and verify its extremes numerically",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.10",
)
