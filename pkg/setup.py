# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

""" Setup
"""
from setuptools import setup, find_packages
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='maiplab',
    version='0.1.0',
    description='Multi-agent interactive trajectory prediction at a simulated urban intersection',
    long_description=long_description,
    long_description_content_type='text/markdown',

    # Note that this is a string of words separated by whitespace, not a list.
    keywords='trajectory-prediction cvae autodiff intersection-simulation',
    packages=find_packages(exclude=['tests', 'scripts', 'saved_models', 'data', 'config', 'examples']),
    include_package_data=True,
    install_requires=['numpy', 'scipy', 'scikit-learn', 'matplotlib', 'progress', 'ruamel.yaml', 'torch >= 1.8'],
    extras_require={
        'tensorboard': ['tensorboard'],
        'test': ['pytest'],
    },
    entry_points={'console_scripts': ['maiplab = maiplab.cli:main']},
    python_requires='>=3.8',
)
