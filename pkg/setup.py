from setuptools import setup, find_packages

setup(
    name="slagrigid",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=["numpy>=1.22", "einops>=0.6", "tqdm"],
    entry_points={"console_scripts": ["slagrigid=slagrigid.cli:main"]},
)
