from setuptools import setup, find_packages

setup(
    name='prosodic_entrainment',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    package_dir={'prosodic_entrainment': 'prosodic_entrainment'},
    license='MIT',
    description='Prosodic entrainment of dialog partners measured per dialog act',
    classifiers=[  # https://pypi.org/classifiers/
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Information Analysis',
        'Topic :: Multimedia :: Sound/Audio :: Speech',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    entry_points={
        'console_scripts': ['prosodic-entrainment=prosodic_entrainment.cli:main',
                            ],
    },
    install_requires=['pandas', 'numpy', 'scipy', 'matplotlib'],
    extras_require={'test': ['pytest', 'hypothesis']},
)
